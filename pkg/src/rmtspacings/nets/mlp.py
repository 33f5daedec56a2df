"""Fully connected ReLU networks on a flat weight vector.

Layout of the flat vector: for each layer in order, the ``(out, in)`` weight
matrix in row-major order followed by the ``out`` biases. A 784-10 softmax
regression therefore has ``784 * 10 + 10 = 7850`` parameters.

Derivatives use ``torch.func`` in float64. The Hessian is assembled from
Hessian-vector products computed forward-over-reverse (a JVP of the
gradient), one chunk of basis directions at a time. The ReLU derivative at
zero is taken as zero.
"""

import json
from dataclasses import dataclass

import numpy as np
import torch
from torch.func import grad, jacrev, jvp, vmap

from rmtspacings.errors import (
    DimensionError,
    NumericalError,
    ParseError,
    ResourceError,
    SchemaError,
    ValidationError,
)

HEADS = {
    "softmax_cross_entropy": "cross_entropy",
    "linear_squared_error": "squared_error",
}
DEFAULT_HESSIAN_CAP = 4000
DTYPE = torch.float64


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple
    output_head: str = "linear_squared_error"
    activation: str = "relu"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ValidationError(f"need at least two positive layer widths, got {self.layer_widths}")
        if self.output_head not in HEADS:
            raise ValidationError(f"unknown output head {self.output_head!r}")
        if self.activation != "relu":
            raise ValidationError("only ReLU activations are supported")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def layer_shapes(self):
        w = self.layer_widths
        return [(w[i + 1], w[i]) for i in range(len(w) - 1)]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]

    @property
    def loss_kind(self) -> str:
        return HEADS[self.output_head]

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "output_head": self.output_head,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["layer_widths"]), d.get("output_head", "linear_squared_error"),
                   d.get("activation", "relu"))


def init_weights(spec: MlpSpec, seed: int) -> np.ndarray:
    """Kaiming-uniform weights ``U(-b, b)``, ``b = sqrt(6 / fan_in)``; zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for out, inp in spec.layer_shapes:
        bound = np.sqrt(6.0 / inp)
        parts.append(rng.uniform(-bound, bound, size=out * inp))
        parts.append(np.zeros(out))
    return np.concatenate(parts)


def _check_weights(spec, w):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size != spec.n_params:
        raise DimensionError(f"expected {spec.n_params} weights, got shape {w.shape}")
    return w


def _tensor(x):
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)


def _check_kind(spec, kind):
    if kind is None:
        return spec.loss_kind
    if kind != spec.loss_kind:
        raise ValidationError(f"loss {kind!r} is incompatible with head {spec.output_head!r}")
    return kind


def forward_t(spec: MlpSpec, w: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    h = x
    off = 0
    shapes = spec.layer_shapes
    for li, (out, inp) in enumerate(shapes):
        weight = w[off : off + out * inp].reshape(out, inp)
        off += out * inp
        bias = w[off : off + out]
        off += out
        h = h @ weight.T + bias
        if li < len(shapes) - 1:
            h = torch.relu(h)
    return h


def loss_t(spec, w, x, y, kind):
    out = forward_t(spec, w, x)
    if kind == "cross_entropy":
        return -(y * torch.log_softmax(out, dim=-1)).sum(-1).mean()
    return ((out - y) ** 2).sum(-1).mean()


def forward(spec: MlpSpec, w, x) -> np.ndarray:
    """Network output for one feature vector or a ``(N, d)`` batch."""
    w = _check_weights(spec, w)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.input_dim or x.ndim > 2:
        raise DimensionError(f"expected input of width {spec.input_dim}, got shape {x.shape}")
    with torch.no_grad():
        return forward_t(spec, _tensor(w), _tensor(x)).numpy()


def _batch_tensors(spec, batch):
    x = np.asarray(batch.features, dtype=np.float64)
    y = np.asarray(batch.targets, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValidationError("batch is empty")
    if x.shape[1] != spec.input_dim or y.shape[1] != spec.output_dim:
        raise DimensionError(
            f"batch shapes {x.shape}/{y.shape} do not match widths {spec.layer_widths}"
        )
    return _tensor(x), _tensor(y)


def loss(spec: MlpSpec, w, batch, kind=None) -> float:
    """Mean per-datum loss over ``batch`` (a :class:`~rmtspacings.nets.data.Dataset`)."""
    kind = _check_kind(spec, kind)
    x, y = _batch_tensors(spec, batch)
    with torch.no_grad():
        return float(loss_t(spec, _tensor(_check_weights(spec, w)), x, y, kind))


def gradient(spec: MlpSpec, w, batch, kind=None) -> np.ndarray:
    kind = _check_kind(spec, kind)
    x, y = _batch_tensors(spec, batch)
    g = grad(lambda p: loss_t(spec, p, x, y, kind))(_tensor(_check_weights(spec, w)))
    return g.numpy()


def hessian_exact(spec: MlpSpec, w, batch, kind=None, cap=DEFAULT_HESSIAN_CAP, chunk=256) -> np.ndarray:
    """Exact ``(P, P)`` Hessian of the batch loss, symmetrized."""
    kind = _check_kind(spec, kind)
    n = spec.n_params
    if n > cap:
        raise ResourceError(f"Hessian of {n} parameters exceeds the cap of {cap}")
    x, y = _batch_tensors(spec, batch)
    wt = _tensor(_check_weights(spec, w))
    g = grad(lambda p: loss_t(spec, p, x, y, kind))

    def hvp(v):
        return jvp(g, (wt,), (v,))[1]

    eye = torch.eye(n, dtype=DTYPE)
    rows = [vmap(hvp)(eye[i : i + chunk]) for i in range(0, n, chunk)]
    h = torch.cat(rows).numpy()
    return _symmetrize(h)


def _symmetrize(h, rtol=1e-8):
    scale = max(1.0, float(np.max(np.abs(h))))
    asym = float(np.max(np.abs(h - h.T)))
    if asym > rtol * scale:
        raise NumericalError(f"curvature matrix asymmetry {asym:.3e} exceeds tolerance")
    return 0.5 * (h + h.T)


def output_jacobian(spec: MlpSpec, w, x) -> np.ndarray:
    """``(N * c, P)`` Jacobian of the stacked outputs with respect to the weights."""
    wt = _tensor(_check_weights(spec, w))
    xt = _tensor(x)
    return jacrev(lambda p: forward_t(spec, p, xt).reshape(-1))(wt).numpy()


def gauss_newton(spec: MlpSpec, w, batch, cap=DEFAULT_HESSIAN_CAP) -> np.ndarray:
    """``J^T J / N`` for a squared-error network; positive semi-definite."""
    if spec.output_head != "linear_squared_error":
        raise ValidationError("Gauss-Newton matrices require the squared-error head")
    if spec.n_params > cap:
        raise ResourceError(f"Gauss-Newton of {spec.n_params} parameters exceeds the cap of {cap}")
    x, _ = _batch_tensors(spec, batch)
    j = output_jacobian(spec, w, x.numpy())
    return _symmetrize(j.T @ j / x.shape[0])


WEIGHTS_FORMAT = "rmtspacings-weights/1"


def save_weights(path, spec: MlpSpec, w, meta=None) -> None:
    """JSON file: the network architecture header followed by the flat weight array."""
    w = _check_weights(spec, w)
    if not np.all(np.isfinite(w)):
        raise NumericalError("refusing to save non-finite weights")
    doc = {
        "format": WEIGHTS_FORMAT,
        "spec": spec.to_dict(),
        "n_params": spec.n_params,
        "weights": [float(v) for v in w],
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"), allow_nan=False)
        fh.write("\n")


def load_weights(path):
    """Return ``(spec, weights, meta)``; floats round-trip exactly."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})") from None
    if doc.get("format") != WEIGHTS_FORMAT:
        raise SchemaError(f"{path}: not a weights file")
    spec = MlpSpec.from_dict(doc["spec"])
    w = np.asarray(doc["weights"], dtype=np.float64)
    if w.size != doc.get("n_params") or w.size != spec.n_params:
        raise SchemaError(f"{path}: weight count does not match the architecture header")
    return spec, w, doc.get("meta", {})
