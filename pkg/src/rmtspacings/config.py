"""Experiment configuration records (JSON-serializable)."""

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from rmtspacings.ensembles import EnsembleSpec
from rmtspacings.errors import ValidationError
from rmtspacings.localstats import DEFAULT_BINS, DEFAULT_TRUNCATION
from rmtspacings.nets.train import TrainConfig
from rmtspacings.unfold import DEFAULT_CUTOFF

STATISTICS = ("spacings", "ratios")
UNFOLDINGS = ("empirical", "analytic", "identity")
MATRICES = ("hessian", "gauss_newton")


def _from_dict(cls, d, what):
    if d is None:
        return cls()
    if isinstance(d, cls):
        return d
    names = {f.name for f in fields(cls)}
    extra = set(d) - names
    if extra:
        raise ValidationError(f"unknown {what} fields: {sorted(extra)}")
    return cls(**d)


@dataclass(frozen=True)
class UnfoldingConfig:
    """``kind``: empirical (pooled, split), analytic (GOE counting function) or identity.

    ``sigma`` is the off-diagonal scale assumed by the analytic map.
    """

    kind: str = "empirical"
    fit_fraction: float = 2.0 / 3.0
    seed: int = 0
    interpolate: bool = True
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in UNFOLDINGS:
            raise ValidationError(f"unknown unfolding {self.kind!r}; expected one of {UNFOLDINGS}")


@dataclass(frozen=True)
class AnalysisConfig:
    """How spectra are reduced to local statistics.

    ``bulk_iqr_width``: when set, only eigenvalues within this many
    interquartile ranges of each spectrum's median are kept, which strips
    well-separated outliers before the statistics are computed.
    """

    statistics: tuple = STATISTICS
    unfolding: UnfoldingConfig = field(default_factory=UnfoldingConfig)
    degeneracy_cutoff: float = DEFAULT_CUTOFF
    truncation: float = DEFAULT_TRUNCATION
    bins: int = DEFAULT_BINS
    spacing_range: tuple = (0.0, 4.0)
    spacing_reference: str = "wigner"
    bulk_iqr_width: Optional[float] = None

    def __post_init__(self):
        stats = tuple(self.statistics)
        bad = set(stats) - set(STATISTICS)
        if bad or not stats:
            raise ValidationError(f"statistics must be a non-empty subset of {STATISTICS}")
        object.__setattr__(self, "statistics", stats)
        object.__setattr__(self, "unfolding", _from_dict(UnfoldingConfig, self.unfolding, "unfolding"))
        object.__setattr__(self, "spacing_range", tuple(float(v) for v in self.spacing_range))
        if not self.degeneracy_cutoff > 0:
            raise ValidationError("degeneracy_cutoff must be positive")
        if not self.truncation > 0:
            raise ValidationError("truncation must be positive")
        if self.spacing_reference not in ("wigner", "poisson"):
            raise ValidationError("spacing_reference must be 'wigner' or 'poisson'")

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d, "analysis")

    def to_dict(self):
        d = asdict(self)
        d["statistics"] = list(self.statistics)
        d["spacing_range"] = list(self.spacing_range)
        return d


@dataclass(frozen=True)
class NetworkSource:
    """A network whose curvature matrices are sampled over data batches.

    ``dataset`` is a CSV path (``schema`` ``bike`` or ``standardize``) or
    ``None`` for synthetic Gaussian classification described by
    ``synthetic`` (``n``, ``d``, ``c``, ``seed``). ``train`` holds
    :class:`TrainConfig` fields, or ``None`` to analyse the network at
    initialization. ``weights`` loads a saved weight file instead of
    training. ``batch_size == 0`` computes one matrix over the whole split.
    """

    layer_widths: tuple
    output_head: str = "linear_squared_error"
    dataset: Optional[str] = None
    schema: str = "bike"
    target: str = "cnt"
    n_classes: Optional[int] = None
    synthetic: Optional[dict] = None
    test_fraction: float = 0.2
    split_seed: int = 0
    train: Optional[dict] = None
    weights: Optional[str] = None
    matrix: str = "hessian"
    split: str = "test"
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if self.matrix not in MATRICES:
            raise ValidationError(f"matrix must be one of {MATRICES}")
        if self.split not in ("train", "test"):
            raise ValidationError("split must be 'train' or 'test'")
        if self.batch_size < 0:
            raise ValidationError("batch_size must be >= 0")
        if self.dataset is None and not self.synthetic:
            raise ValidationError("network source needs a dataset path or a synthetic spec")
        if self.train is not None:
            self.train_config()

    def train_config(self) -> TrainConfig:
        d = dict(self.train or {})
        d["seed"] = self.seed
        return _from_dict(TrainConfig, d, "train")

    def to_dict(self):
        d = asdict(self)
        d["layer_widths"] = list(self.layer_widths)
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    source: object
    n_matrices: int = 100
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    out_dir: str = "out"

    def __post_init__(self):
        if self.n_matrices < 1:
            raise ValidationError("n_matrices must be positive")
        object.__setattr__(self, "analysis", AnalysisConfig.from_dict(self.analysis)
                           if isinstance(self.analysis, dict) else self.analysis)
        if "spacings" in self.analysis.statistics and self.analysis.unfolding.kind == "empirical":
            if self.n_matrices < 3:
                raise ValidationError("empirical unfolding needs n_matrices >= 3")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "ensemble" in d:
            ens = dict(d.pop("ensemble"))
            if "n_matrices" in d:
                ens["n_samples"] = d["n_matrices"]
            source = EnsembleSpec.from_dict(ens)
            d.setdefault("n_matrices", source.n_samples)
        elif "network" in d:
            net = d.pop("network")
            unknown = set(net) - {f.name for f in fields(NetworkSource)}
            if unknown:
                raise ValidationError(f"unknown network fields: {sorted(unknown)}")
            source = NetworkSource(**net)
        else:
            raise ValidationError("config needs an 'ensemble' or 'network' section")
        extra = set(d) - {"n_matrices", "analysis", "out_dir"}
        if extra:
            raise ValidationError(f"unknown config fields: {sorted(extra)}")
        return cls(source, d.get("n_matrices", 100), AnalysisConfig.from_dict(d.get("analysis")),
                   d.get("out_dir", "out"))

    def to_dict(self) -> dict:
        key = "ensemble" if isinstance(self.source, EnsembleSpec) else "network"
        return {
            key: self.source.to_dict(),
            "n_matrices": self.n_matrices,
            "analysis": self.analysis.to_dict(),
            "out_dir": self.out_dir,
        }

    def with_overrides(self, seed=None, out_dir=None, cutoff=None, truncation=None, bins=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, source=replace(cfg.source, seed=seed))
        if out_dir is not None:
            cfg = replace(cfg, out_dir=out_dir)
        a = cfg.analysis
        if cutoff is not None:
            a = replace(a, degeneracy_cutoff=cutoff)
        if truncation is not None:
            a = replace(a, truncation=truncation)
        if bins is not None:
            a = replace(a, bins=bins)
        return replace(cfg, analysis=a)
