"""End-to-end commands: sample spectra, analyse them, run network experiments.

Each command is a pure function of its configuration. Matrix draws,
eigensolves and curvature batches run on a bounded thread pool whose size
comes from the ``RMTSPACINGS_WORKERS`` environment variable (default 1);
results are collected in index order, so output never depends on the pool
size.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from rmtspacings import report
from rmtspacings.config import AnalysisConfig, ExperimentConfig, NetworkSource
from rmtspacings.eigensolve import eigvals_symmetric
from rmtspacings.ensembles import EnsembleSpec
from rmtspacings.errors import DimensionError, ValidationError
from rmtspacings.localstats import (
    fit_semicircle,
    histogram,
    ks_statistic,
    poisson_cdf,
    poisson_pdf,
    pool_ratios,
    ratio_surmise_cdf,
    ratio_surmise_pdf,
    semicircle_bin_density,
    truncated_ratio_cdf,
    wigner_surmise_cdf,
    wigner_surmise_pdf,
)
from rmtspacings.nets import data as netdata
from rmtspacings.nets.mlp import (
    MlpSpec,
    gauss_newton,
    hessian_exact,
    init_weights,
    load_weights,
    loss,
    save_weights,
)
from rmtspacings.nets.train import train_sgd
from rmtspacings.spectra_io import SpectrumRecord, write_spectra
from rmtspacings.spectrum import Spectrum
from rmtspacings.unfold import (
    AnalyticGoeMap,
    IdentityMap,
    SpectrumPool,
    SplitConfig,
    build_empirical_cdf,
    filter_degenerate,
    restrict_to_interval,
    split_pool_indices,
    unfold,
)

log = logging.getLogger("rmtspacings")

WORKERS_ENV = "RMTSPACINGS_WORKERS"
SPACING_REFERENCES = {
    "wigner": (wigner_surmise_cdf, wigner_surmise_pdf, "Wigner surmise"),
    "poisson": (poisson_cdf, poisson_pdf, "Poisson exp(-s)"),
}


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def _ordered_map(fn, items, workers=None):
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# Sampling ------------------------------------------------------------------


def sample_records(ens: EnsembleSpec, n_matrices=None, method="ql", workers=None):
    """Draw and eigensolve ``n_matrices`` members of an ensemble."""
    n = ens.n_samples if n_matrices is None else int(n_matrices)

    def one(i):
        d = ens.draw(i)
        s = d if isinstance(d, Spectrum) else eigvals_symmetric(d, method)
        return SpectrumRecord(f"{ens.kind}-{i:04d}", s, {"index": i, "seed": ens.seed + i})

    return _ordered_map(one, range(n), workers)


# Analysis ------------------------------------------------------------------


@dataclass
class StatisticResult:
    name: str
    samples: np.ndarray
    hist: object
    ks: float
    reference: str
    reference_pdf: object
    summary: dict = field(default_factory=dict)


@dataclass
class AnalysisResult:
    statistics: dict
    density: object
    density_fit: tuple
    summary: dict


def _bulk(s: Spectrum, width: float) -> Spectrum:
    q1, med, q3 = np.quantile(s.values, [0.25, 0.5, 0.75])
    half = width * (q3 - q1)
    if half <= 0:
        return s
    return restrict_to_interval(s, med - half, med + half)


def _prepare(records, cfg: AnalysisConfig):
    kept, ids, dims, removed = [], [], [], []
    n_before = n_deg = n_bulk = 0
    skipped = []
    for rec in records:
        s, frac = filter_degenerate(rec.spectrum, cfg.degeneracy_cutoff)
        n_before += rec.spectrum.dim
        n_deg += rec.spectrum.dim - s.dim
        removed.append(frac)
        if cfg.bulk_iqr_width is not None and s.dim >= 3:
            b = _bulk(s, cfg.bulk_iqr_width)
            n_bulk += s.dim - b.dim
            s = b
        if s.dim < 3:
            log.warning("skipping %s: only %d eigenvalues survive filtering", rec.matrix_id, s.dim)
            skipped.append(rec.matrix_id)
            continue
        kept.append(s)
        ids.append(rec.matrix_id)
        dims.append(rec.spectrum.dim)
    info = {
        "n_spectra": len(records),
        "n_skipped_spectra": len(skipped),
        "skipped_spectra": skipped,
        "n_eigenvalues": n_before,
        "removed_degenerate_fraction": n_deg / n_before if n_before else 0.0,
        "removed_degenerate_fraction_per_spectrum": {
            "min": float(min(removed)) if removed else 0.0,
            "max": float(max(removed)) if removed else 0.0,
        },
    }
    if cfg.bulk_iqr_width is not None:
        info["removed_outside_bulk_fraction"] = n_bulk / n_before if n_before else 0.0
    return kept, ids, dims, info


def _spacings(spectra, ids, dims, cfg: AnalysisConfig) -> StatisticResult:
    u = cfg.unfolding
    extra = {"unfolding": u.kind}
    if u.kind == "empirical":
        if len(spectra) < 3:
            raise ValidationError(
                f"empirical unfolding needs at least 3 usable spectra, got {len(spectra)}"
            )
        fit_ix, ana_ix = split_pool_indices(len(spectra), SplitConfig(u.fit_fraction, u.seed))
        fmap = build_empirical_cdf(SpectrumPool(tuple(spectra[i] for i in fit_ix)), u.interpolate)
        parts = [unfold(spectra[i], fmap).spacings for i in ana_ix]
        extra.update(n_fit_spectra=len(fit_ix), n_analysis_spectra=len(ana_ix),
                     analysis_ids=[ids[i] for i in ana_ix])
    else:
        maps = {}
        parts = []
        for s, d in zip(spectra, dims):
            if u.kind == "analytic":
                m = maps.setdefault(d, AnalyticGoeMap(d, u.sigma))
            else:
                m = IdentityMap()
            parts.append(unfold(s, m).spacings)
        extra.update(n_fit_spectra=0, n_analysis_spectra=len(spectra))
    samples = np.concatenate(parts)
    if np.any(samples < 0):
        raise ValidationError("unfolding produced negative spacings; the map is not monotone")
    cdf, pdf, label = SPACING_REFERENCES[cfg.spacing_reference]
    hist = histogram(samples, cfg.bins, cfg.spacing_range)
    ks = ks_statistic(samples, cdf, cfg.spacing_reference).ks_statistic
    extra["ks_vs"] = {k: ks_statistic(samples, v[0], k).ks_statistic for k, v in SPACING_REFERENCES.items()}
    extra["mean"] = float(samples.mean())
    summary = {
        "n_spacings": int(samples.size),
        "ks_statistic": ks,
        "reference": cfg.spacing_reference,
        "clipped_fraction": hist.clipped_fraction,
        **extra,
    }
    return StatisticResult("spacings", samples, hist, ks, label, pdf, summary)


def _ratios(spectra, cfg: AnalysisConfig) -> StatisticResult:
    t = cfg.truncation
    rs = pool_ratios(spectra, t)
    if rs.ratios.size == 0:
        raise ValidationError("no spacing ratios at or below the truncation")
    norm = ratio_surmise_cdf(t)
    hist = histogram(rs.ratios, cfg.bins, (0.0, t))
    ks = ks_statistic(rs.ratios, truncated_ratio_cdf(t), "ratio").ks_statistic
    summary = {
        "n_ratios": int(rs.ratios.size),
        "ks_statistic": ks,
        "reference": "ratio_surmise_truncated",
        "truncation": t,
        "n_dropped_above_truncation": rs.n_dropped,
        "retained_fraction": rs.retained_fraction,
        "reference_retained_fraction": float(norm),
        "clipped_fraction": hist.clipped_fraction,
    }
    return StatisticResult("ratios", rs.ratios, hist, ks, "ratio surmise",
                           lambda r: ratio_surmise_pdf(r) / norm, summary)


def _density(spectra, bins):
    v = np.concatenate([s.values for s in spectra])
    lo, hi = float(v.min()), float(v.max())
    if not lo < hi:
        return None, None, {"n_eigenvalues": int(v.size)}
    hist = histogram(v, bins, (lo, hi))
    center, radius = fit_semicircle(v, bins)
    ref = semicircle_bin_density(hist.bin_edges, center, radius)
    peak = 2.0 / (math.pi * radius)
    info = {
        "n_eigenvalues": int(v.size),
        "range": [lo, hi],
        "semicircle_center": center,
        "semicircle_radius": radius,
        "semicircle_deviation": float(np.max(np.abs(hist.density - ref)) / peak),
    }
    return hist, (center, radius), info


def analyze_records(records, cfg: AnalysisConfig) -> AnalysisResult:
    if not records:
        raise ValidationError("no spectra to analyse")
    spectra, ids, dims, info = _prepare(records, cfg)
    if not spectra:
        raise ValidationError("every spectrum was skipped after filtering")
    stats = {}
    if "spacings" in cfg.statistics:
        stats["spacings"] = _spacings(spectra, ids, dims, cfg)
    if "ratios" in cfg.statistics:
        stats["ratios"] = _ratios(spectra, cfg)
    dens, fit, dinfo = _density(spectra, cfg.bins)
    summary = dict(info)
    for name, st in stats.items():
        summary[name] = st.summary
    summary["density"] = dinfo
    return AnalysisResult(stats, dens, fit, summary)


def _semicircle_pdf(center, radius):
    def pdf(x):
        u = np.clip((np.asarray(x) - center) / radius, -1.0, 1.0)
        return 2.0 / (math.pi * radius) * np.sqrt(1.0 - u * u)
    return pdf


XLABELS = {"spacings": "unfolded spacing s", "ratios": "spacing ratio r"}


def write_bundle(out_dir, result: AnalysisResult, config_echo: dict, extra=None) -> dict:
    """Write CSVs, SVGs and ``summary.json`` (last, so its presence marks completion)."""
    os.makedirs(out_dir, exist_ok=True)
    summary_path = os.path.join(out_dir, "summary.json")
    if os.path.exists(summary_path):
        os.remove(summary_path)
    for name, st in result.statistics.items():
        report.write_histogram_csv(os.path.join(out_dir, f"{name}_histogram.csv"), st.hist)
        report.write_samples_csv(os.path.join(out_dir, f"{name}_samples.csv"), st.samples, name[:-1])
        svg = report.render_svg(st.hist, st.reference_pdf, title=f"{name} (KS {st.ks:.4f})",
                                xlabel=XLABELS[name], reference_label=st.reference)
        with open(os.path.join(out_dir, f"{name}.svg"), "w") as fh:
            fh.write(svg)
    if result.density is not None:
        report.write_histogram_csv(os.path.join(out_dir, "density_histogram.csv"), result.density)
        svg = report.render_svg(result.density, _semicircle_pdf(*result.density_fit),
                                title="mean spectral density", xlabel="eigenvalue",
                                reference_label="best-fit semicircle")
        with open(os.path.join(out_dir, "density.svg"), "w") as fh:
            fh.write(svg)
    summary = dict(result.summary)
    if extra:
        summary.update(extra)
    summary["config"] = config_echo
    report.write_json(summary_path, summary)
    return summary


# Networks ------------------------------------------------------------------


@dataclass
class NetworkRun:
    spec: MlpSpec
    weights: np.ndarray
    train: netdata.Dataset
    test: netdata.Dataset
    metrics: dict
    loss_trace: list = field(default_factory=list)


def load_network_data(src: NetworkSource):
    if src.dataset is not None:
        kwargs = {}
        if src.schema == "standardize":
            kwargs = {"target": src.target, "n_classes": src.n_classes}
        return netdata.load_splits(src.dataset, src.schema, src.test_fraction, src.split_seed, **kwargs)
    syn = dict(src.synthetic)
    unknown = set(syn) - {"n", "d", "c", "seed", "separation"}
    if unknown:
        raise ValidationError(f"unknown synthetic fields: {sorted(unknown)}")
    full = netdata.make_gaussian_classification(syn["n"], syn["d"], syn["c"], syn.get("seed", 0),
                                                syn.get("separation", 1.0))
    tr, te = netdata.split_indices(len(full), src.test_fraction, src.split_seed)
    return full.subset(tr, full.name + ":train"), full.subset(te, full.name + ":test")


def prepare_network(src: NetworkSource) -> NetworkRun:
    """Load data, then train, load or initialize the weights."""
    train, test = load_network_data(src)
    spec = MlpSpec(src.layer_widths, src.output_head)
    if train.features.shape[1] != spec.input_dim or train.targets.shape[1] != spec.output_dim:
        raise DimensionError(
            f"network {spec.layer_widths} does not match data with {train.features.shape[1]} "
            f"features and {train.targets.shape[1]} targets"
        )
    trace = []
    if src.weights is not None:
        wspec, w, _ = load_weights(src.weights)
        if wspec != spec:
            raise ValidationError(f"{src.weights}: saved network {wspec.layer_widths} differs from config")
        origin = "loaded"
    elif src.train is not None:
        res = train_sgd(spec, train, src.train_config())
        w, trace, origin = res.weights, res.loss_trace, "trained"
    else:
        w, origin = init_weights(spec, src.seed), "initial"
    metrics = {
        "weights": origin,
        "n_params": spec.n_params,
        "train_loss": loss(spec, w, train),
        "test_loss": loss(spec, w, test),
        "n_train": len(train),
        "n_test": len(test),
    }
    return NetworkRun(spec, w, train, test, metrics, trace)


def curvature_records(run: NetworkRun, src: NetworkSource, n_matrices: int, workers=None):
    """Spectra of Hessian or Gauss-Newton matrices over seeded batches."""
    data = run.test if src.split == "test" else run.train
    batches = data.batches(src.batch_size, seed=src.seed + 1, n_batches=n_matrices)
    if src.matrix == "hessian":
        def build(b):
            return hessian_exact(run.spec, run.weights, b)
    else:
        def build(b):
            return gauss_newton(run.spec, run.weights, b)

    def one(i):
        s = eigvals_symmetric(build(batches[i]))
        meta = {"index": i, "matrix": src.matrix, "split": src.split, "batch_rows": len(batches[i])}
        return SpectrumRecord(f"{src.matrix}-{i:04d}", s, meta)

    return _ordered_map(one, range(len(batches)), workers)


# Commands ------------------------------------------------------------------


def _echo(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out_dir", None)
    return d


def cmd_sample(cfg: ExperimentConfig, out_dir=None) -> str:
    if not isinstance(cfg.source, EnsembleSpec):
        raise ValidationError("sample needs an ensemble source")
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "spectra.jsonl")
    records = sample_records(cfg.source, cfg.n_matrices)
    write_spectra(path, records)
    log.info("wrote %d spectra to %s", len(records), path)
    return path


def cmd_analyze(records, cfg: AnalysisConfig, out_dir, source=None) -> dict:
    result = analyze_records(records, cfg)
    echo = {"analysis": cfg.to_dict()}
    if source is not None:
        echo["input"] = source
    return write_bundle(out_dir, result, echo)


def cmd_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    extra = {}
    if isinstance(cfg.source, EnsembleSpec):
        records = sample_records(cfg.source, cfg.n_matrices)
    else:
        run = prepare_network(cfg.source)
        extra["network"] = run.metrics
        if run.metrics["weights"] == "trained":
            save_weights(os.path.join(out_dir, "weights.json"), run.spec, run.weights, run.metrics)
        records = curvature_records(run, cfg.source, cfg.n_matrices)
    write_spectra(os.path.join(out_dir, "spectra.jsonl"), records)
    result = analyze_records(records, cfg.analysis)
    return write_bundle(out_dir, result, _echo(cfg), extra)


def cmd_train(cfg: ExperimentConfig, out_dir=None) -> dict:
    src = cfg.source
    if not isinstance(src, NetworkSource) or src.train is None:
        raise ValidationError("train needs a network source with a 'train' section")
    src = replace(src, weights=None)
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    run = prepare_network(src)
    save_weights(os.path.join(out_dir, "weights.json"), run.spec, run.weights, run.metrics)
    summary = {"network": run.metrics, "loss_trace": [float(v) for v in run.loss_trace],
               "config": _echo(replace(cfg, source=src))}
    report.write_json(os.path.join(out_dir, "train_summary.json"), summary)
    return summary
