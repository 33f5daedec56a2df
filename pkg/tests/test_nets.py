import math

import numpy as np
import pytest

from rmtspacings.eigensolve import eigvals_symmetric
from rmtspacings.errors import (
    DimensionError,
    ParseError,
    ResourceError,
    SchemaError,
    TrainingError,
    ValidationError,
)
from rmtspacings.nets import (
    Dataset,
    MlpSpec,
    TrainConfig,
    forward,
    gauss_newton,
    gradient,
    hessian_exact,
    init_weights,
    load_csv_dataset,
    load_splits,
    load_weights,
    loss,
    make_gaussian_classification,
    one_hot,
    save_weights,
    split_indices,
    train_sgd,
)
from rmtspacings.nets.data import count_rows


def regression_batch(n=40, d=13, c=1, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.standard_normal((n, d)), rng.standard_normal((n, c)))


def small_net():
    spec = MlpSpec((13, 5, 1))
    return spec, init_weights(spec, 3), regression_batch()


def fd_gradient(spec, w, batch, h):
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (loss(spec, w + e, batch) - loss(spec, w - e, batch)) / (2 * h)
    return g


def with_bias(x):
    return np.hstack([x, np.ones((x.shape[0], 1))])


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# Spec and initialization


def test_spec_validation_and_counts():
    assert MlpSpec((784, 10)).n_params == 7850
    assert MlpSpec((13, 32, 16, 1)).n_params == 993
    assert MlpSpec((13, 100, 100, 50, 1)).n_params == 16601
    with pytest.raises(ValidationError):
        MlpSpec((5,))
    with pytest.raises(ValidationError):
        MlpSpec((5, 0, 1))
    with pytest.raises(ValidationError):
        MlpSpec((5, 1), output_head="hinge")
    spec = MlpSpec((4, 3, 2), "softmax_cross_entropy")
    assert MlpSpec.from_dict(spec.to_dict()) == spec


def test_init_bound_and_variance():
    spec = MlpSpec((6, 20000))
    w = init_weights(spec, 0)
    weights, biases = w[: 6 * 20000], w[6 * 20000 :]
    assert np.all(np.abs(weights) < 1.0) and np.abs(weights).max() > 0.999
    assert np.all(biases == 0)
    assert abs(weights.var() / (1 / 3) - 1) <= 0.03
    assert np.array_equal(w, init_weights(spec, 0))
    assert not np.array_equal(w, init_weights(spec, 1))


def test_init_per_layer_bounds():
    spec = MlpSpec((24, 150, 3))
    w = init_weights(spec, 5)
    first = w[: 24 * 150]
    second = w[24 * 150 + 150 : 24 * 150 + 150 + 450]
    assert np.abs(first).max() <= math.sqrt(6 / 24)
    assert np.abs(second).max() <= math.sqrt(6 / 150)


# Forward pass and loss


def test_forward_examples():
    spec = MlpSpec((4, 6, 3))
    x = np.random.default_rng(0).standard_normal((5, 4))
    assert np.array_equal(forward(spec, np.zeros(spec.n_params), x), np.zeros((5, 3)))
    ident = MlpSpec((3, 3))
    w = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
    assert np.array_equal(forward(ident, w, x[:, :3]), x[:, :3])
    # A second layer of identity weights exposes the ReLU activations.
    relu = MlpSpec((4, 6, 6))
    w = np.concatenate([init_weights(MlpSpec((4, 6)), 1), np.eye(6).ravel(), np.zeros(6)])
    out = forward(relu, w, x)
    assert np.all(out >= 0) and np.any(out == 0)
    assert forward(spec, init_weights(spec, 0), x[0]).shape == (3,)
    with pytest.raises(DimensionError):
        forward(spec, np.zeros(spec.n_params), np.ones(5))
    with pytest.raises(DimensionError):
        forward(spec, np.zeros(3), x)


def test_loss_examples():
    spec = MlpSpec((7, 10), "softmax_cross_entropy")
    batch = make_gaussian_classification(30, 7, 10, seed=0)
    assert loss(spec, np.zeros(spec.n_params), batch) == pytest.approx(math.log(10), abs=1e-14)
    lin = MlpSpec((3, 2))
    w = init_weights(lin, 4)
    x = np.random.default_rng(1).standard_normal((8, 3))
    exact = Dataset(x, forward(lin, w, x))
    assert loss(lin, w, exact) == 0.0
    with pytest.raises(ValidationError):
        loss(lin, w, exact, kind="cross_entropy")


def test_batch_loss_and_gradient_are_means():
    spec, w, batch = small_net()
    singles = [batch.subset([i]) for i in range(len(batch))]
    assert loss(spec, w, batch) == pytest.approx(np.mean([loss(spec, w, b) for b in singles]), abs=1e-12)
    g = gradient(spec, w, batch)
    assert np.max(np.abs(g - np.mean([gradient(spec, w, b) for b in singles], axis=0))) <= 1e-12
    assert loss(spec, w, batch) >= 0


# Derivatives


def test_gradient_matches_finite_differences():
    spec, w, batch = small_net()
    g = gradient(spec, w, batch)
    fd = fd_gradient(spec, w, batch, 1e-5)
    assert np.max(np.abs(g - fd)) <= 1e-4 * np.max(np.abs(g))


def test_gradient_zero_at_least_squares_solution():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((50, 4))
    y = x @ np.array([1.0, -2.0, 0.5, 3.0]) + 0.7 + 0.1 * rng.standard_normal(50)
    xt = with_bias(x)
    sol = np.linalg.solve(xt.T @ xt, xt.T @ y)
    spec = MlpSpec((4, 1))
    assert np.max(np.abs(gradient(spec, sol, Dataset(x, y)))) <= 1e-12


def test_hessian_matches_finite_differences():
    spec, w, batch = small_net()
    h = hessian_exact(spec, w, batch)
    assert np.array_equal(h, h.T)
    step = 1e-4
    fd = np.empty_like(h)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = step
        fd[:, i] = (gradient(spec, w + e, batch) - gradient(spec, w - e, batch)) / (2 * step)
    assert np.max(np.abs(h - fd)) <= 1e-4 * (1 + np.max(np.abs(h)))


def softmax_regression_hessian(x, w, c):
    """Mean of (diag(p) - p p^T) kron x~ x~^T, re-indexed to the flat layout."""
    n, d = x.shape
    weight, bias = w[: c * d].reshape(c, d), w[c * d :]
    p = softmax(x @ weight.T + bias)
    xt = with_bias(x)
    kron = np.zeros((c * (d + 1), c * (d + 1)))
    for pi, xi in zip(p, xt):
        kron += np.kron(np.diag(pi) - np.outer(pi, pi), np.outer(xi, xi))
    kron /= n
    # Kronecker index k * (d + 1) + j  ->  flat index k * d + j, or c * d + k for the bias.
    flat = np.array([k * d + j if j < d else c * d + k for k in range(c) for j in range(d + 1)])
    out = np.zeros_like(kron)
    out[np.ix_(flat, flat)] = kron
    return out


def test_softmax_regression_hessian_closed_form():
    d, c = 6, 4
    spec = MlpSpec((d, c), "softmax_cross_entropy")
    batch = make_gaussian_classification(64, d, c, seed=1)
    w = init_weights(spec, 2) + np.r_[np.zeros(d * c), np.linspace(-1, 1, c)]
    h = hessian_exact(spec, w, batch)
    assert np.max(np.abs(h - softmax_regression_hessian(batch.features, w, c))) <= 1e-8


def test_quadratic_model_hessian_constant():
    rng = np.random.default_rng(4)
    batch = regression_batch(30, 5, 1, seed=4)
    spec = MlpSpec((5, 1))
    xt = with_bias(batch.features)
    expected = 2 / len(batch) * xt.T @ xt
    for seed in range(3):
        w = rng.standard_normal(spec.n_params)
        assert np.max(np.abs(hessian_exact(spec, w, batch) - expected)) <= 1e-12


def test_linear_network_hessian_is_twice_gauss_newton():
    spec = MlpSpec((7, 3))
    batch = regression_batch(25, 7, 3, seed=5)
    w = init_weights(spec, 0)
    h = hessian_exact(spec, w, batch)
    g = gauss_newton(spec, w, batch)
    assert np.max(np.abs(h - 2 * g)) <= 1e-8


def test_gauss_newton_psd_and_rank():
    spec = MlpSpec((13, 8, 2))
    batch = regression_batch(6, 13, 2, seed=6)
    g = gauss_newton(spec, init_weights(spec, 1), batch)
    assert np.array_equal(g, g.T)
    v = eigvals_symmetric(g).values
    assert v.min() >= -1e-10
    assert np.linalg.matrix_rank(g) <= min(spec.n_params, 6 * 2)
    with pytest.raises(ValidationError):
        gauss_newton(MlpSpec((3, 2), "softmax_cross_entropy"), np.zeros(8),
                     make_gaussian_classification(5, 3, 2, 0))


def test_curvature_cap():
    spec = MlpSpec((13, 40, 1))
    batch = regression_batch(4)
    with pytest.raises(ResourceError):
        hessian_exact(spec, init_weights(spec, 0), batch, cap=500)
    with pytest.raises(ResourceError):
        gauss_newton(spec, init_weights(spec, 0), batch, cap=500)


def test_directional_second_difference():
    spec, w, batch = small_net()
    h = hessian_exact(spec, w, batch)
    rng = np.random.default_rng(8)
    step = 1e-4
    for _ in range(5):
        u = rng.standard_normal(w.size)
        u /= np.linalg.norm(u)
        second = (loss(spec, w + step * u, batch) - 2 * loss(spec, w, batch)
                  + loss(spec, w - step * u, batch)) / step**2
        assert second == pytest.approx(u @ h @ u, rel=1e-3)


def test_hessian_piecewise_constant_under_tiny_perturbation():
    d, c = 6, 4
    spec = MlpSpec((d, c), "softmax_cross_entropy")
    batch = make_gaussian_classification(64, d, c, seed=1)
    w = init_weights(spec, 2)
    u = np.random.default_rng(0).standard_normal(w.size)
    u /= np.linalg.norm(u)
    h0, h1 = hessian_exact(spec, w, batch), hessian_exact(spec, w + 1e-9 * u, batch)
    assert np.max(np.abs(h1 - h0)) <= 1e-6 * np.max(np.abs(h0))
    spec, w, batch = small_net()
    h0, h1 = hessian_exact(spec, w, batch), hessian_exact(spec, w + 1e-9 * u[0] * np.ones_like(w), batch)
    assert np.max(np.abs(h1 - h0)) <= 1e-6 * np.max(np.abs(h0))


def test_linear_model_shares_gauss_newton_null_space():
    spec = MlpSpec((10, 1))
    batch = regression_batch(5, 10, 1, seed=9)
    w = init_weights(spec, 0)
    g, h = gauss_newton(spec, w, batch), hessian_exact(spec, w, batch)
    vals, vecs = np.linalg.eigh(g)
    null = vecs[:, vals < 1e-10]
    assert null.shape[1] == spec.n_params - 5
    assert np.max(np.abs(null.T @ h @ null)) <= 1e-12


# Training


def test_learning_rate_schedule():
    cfg = TrainConfig()
    assert cfg.learning_rate(0) == 0.003 and cfg.learning_rate(149) == 0.003
    assert cfg.learning_rate(150) == 0.003
    assert cfg.learning_rate(210) == pytest.approx((0.003 + 0.00003) / 2)
    assert cfg.learning_rate(270) == 0.00003 and cfg.learning_rate(299) == 0.00003
    with pytest.raises(ValidationError):
        TrainConfig(lr0=1e-3, lr_final=1e-2)
    with pytest.raises(ValidationError):
        TrainConfig(decay_start_epoch=200, decay_end_epoch=100)
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=0)


def test_train_one_dimensional_quadratic():
    x = np.linspace(-2, 2, 200)[:, None]
    y = 3.0 * x[:, 0] + 0.5
    spec = MlpSpec((1, 1))
    cfg = TrainConfig(batch_size=20, seed=0)
    res = train_sgd(spec, Dataset(x, y), cfg)
    # Weight decay makes the target the ridge solution of the normal equations.
    xt = with_bias(x)
    n = len(y)
    ridge = np.linalg.solve(2 / n * xt.T @ xt + cfg.weight_decay * np.eye(2), 2 / n * xt.T @ y)
    assert np.max(np.abs(res.weights - ridge)) <= 1e-3
    assert len(res.loss_trace) == cfg.epochs
    assert res.loss_trace[-1] < res.loss_trace[0]


def test_training_deterministic():
    spec = MlpSpec((13, 6, 1))
    data = regression_batch(100)
    cfg = TrainConfig(epochs=5, decay_start_epoch=2, decay_end_epoch=4, batch_size=16, seed=3)
    a, b = train_sgd(spec, data, cfg), train_sgd(spec, data, cfg)
    assert np.array_equal(a.weights, b.weights) and a.loss_trace == b.loss_trace
    c = train_sgd(spec, data, TrainConfig(epochs=5, decay_start_epoch=2, decay_end_epoch=4,
                                          batch_size=16, seed=4))
    assert not np.array_equal(a.weights, c.weights)


def test_training_divergence_reports_epoch():
    spec = MlpSpec((13, 6, 1))
    data = regression_batch(100)
    cfg = TrainConfig(lr0=1e3, lr_final=1e3, epochs=10, decay_start_epoch=10,
                      decay_end_epoch=10, batch_size=10)
    with pytest.raises(TrainingError) as info:
        train_sgd(spec, data, cfg)
    assert 0 <= info.value.epoch < 10


# Data


def test_bike_preprocessing(bike_csv):
    n = count_rows(bike_csv)
    full = load_csv_dataset(bike_csv)
    assert full.features.shape == (n, 13) and full.targets.shape == (n, 1)
    assert abs(full.targets.mean() - 1) <= 1e-10
    train_idx, test_idx = split_indices(n, 0.2, 0)
    train, test = load_splits(bike_csv, test_fraction=0.2, seed=0)
    assert len(train) + len(test) == n and len(test) == round(0.2 * n)
    assert abs(train.targets.mean() - 1) <= 1e-10
    assert np.setdiff1d(train_idx, test_idx).size == train_idx.size
    raw = load_csv_dataset(bike_csv, standardize_features=False)
    assert raw.features[:, 0].min() == 0 and raw.features[:, 0].max() == 364
    assert raw.features[0, 4] == 0  # hr column of the first row


def test_bike_schema_and_parse_errors(tmp_path, bike_csv):
    lines = open(bike_csv).read().splitlines()
    header = lines[0].split(",")
    bad_schema = tmp_path / "noreg.csv"
    keep = [i for i, h in enumerate(header) if h != "registered"]
    bad_schema.write_text("\n".join(",".join(r.split(",")[i] for i in keep) for r in lines[:5]) + "\n")
    with pytest.raises(SchemaError, match="registered"):
        load_csv_dataset(bad_schema)
    bad_value = tmp_path / "bad.csv"
    rows = lines[:6]
    fields = rows[3].split(",")
    fields[header.index("temp")] = "warm"
    rows[3] = ",".join(fields)
    bad_value.write_text("\n".join(rows) + "\n")
    with pytest.raises(ParseError) as info:
        load_csv_dataset(bad_value)
    assert info.value.row == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaError):
        load_csv_dataset(empty)


def test_standardize_schema(tmp_path):
    path = tmp_path / "toy.csv"
    rng = np.random.default_rng(0)
    a, b, lab = rng.normal(5, 2, 50), rng.normal(-1, 0.1, 50), rng.integers(0, 3, 50)
    path.write_text("a,b,label\n" + "".join(f"{x},{y},{z}\n" for x, y, z in zip(a, b, lab)))
    ds = load_csv_dataset(path, schema="standardize", target="label", n_classes=3)
    assert ds.features.shape == (50, 2) and ds.targets.shape == (50, 3)
    assert np.allclose(ds.features.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(ds.features.std(axis=0), 1, atol=1e-12)
    assert np.array_equal(ds.targets.argmax(axis=1), lab)
    with pytest.raises(SchemaError):
        load_csv_dataset(path, schema="standardize", target="y")
    with pytest.raises(ValidationError):
        load_csv_dataset(path, schema="mnist")


def test_dataset_and_batches():
    with pytest.raises(DimensionError):
        Dataset(np.ones((3, 2)), np.ones((4, 1)))
    with pytest.raises(ValidationError):
        Dataset(np.ones((0, 2)), np.ones((0, 1)))
    ds = regression_batch(130)
    bs = ds.batches(64, seed=1)
    assert len(bs) == 2 and all(len(b) == 64 for b in bs)
    rows = np.concatenate([b.features[:, 0] for b in bs])
    assert np.unique(rows).size == 128
    many = ds.batches(64, seed=1, n_batches=5)
    assert len(many) == 5 and np.array_equal(many[0].features, bs[0].features)
    assert np.array_equal(ds.batches(0, seed=0)[0].features, ds.features)
    with pytest.raises(ValidationError):
        ds.batches(200, seed=0)


def test_one_hot():
    assert one_hot([0, 2], 3).tolist() == [[1, 0, 0], [0, 0, 1]]
    with pytest.raises(ValidationError):
        one_hot([0, 3], 3)
    with pytest.raises(ValidationError):
        one_hot([0.5], 3)


def test_weights_round_trip(tmp_path):
    spec = MlpSpec((13, 5, 1))
    w = init_weights(spec, 0) * np.pi
    path = tmp_path / "w.json"
    save_weights(path, spec, w, meta={"epochs": 3})
    spec2, w2, meta = load_weights(path)
    assert spec2 == spec and np.array_equal(w2, w) and meta == {"epochs": 3}
    with pytest.raises(DimensionError):
        save_weights(path, spec, w[:-1])
    doc = path.read_text().replace('"n_params":76', '"n_params":75')
    path.write_text(doc)
    with pytest.raises(SchemaError):
        load_weights(path)
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_weights(path)
    path.write_text('{"format": "other"}')
    with pytest.raises(SchemaError):
        load_weights(path)
