"""Random symmetric matrix ensembles.

Matrices are returned as plain ``(P, P)`` float64 arrays that are exactly
symmetric. Every sampler is a pure function of its parameters and an integer
seed; independent draws in an ensemble use ``seed + index``.

GOE convention: off-diagonal entries have variance ``sigma**2`` and diagonal
entries ``2 * sigma**2``, obtained as ``(A + A.T) / sqrt(2)`` with ``A``
i.i.d. ``N(0, sigma**2)``. The mean spectral density is then the semicircle
of radius ``2 * sigma * sqrt(P)``.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from rmtspacings.errors import DimensionError, ValidationError
from rmtspacings.spectrum import Spectrum, check_symmetric

KINDS = ("goe", "gp_hessian", "poisson")


def _check_dim(dim):
    if int(dim) != dim or dim < 1:
        raise ValidationError(f"dim must be a positive integer, got {dim!r}")


@dataclass(frozen=True)
class GoeParams:
    dim: int
    sigma: float = 1.0

    def __post_init__(self):
        _check_dim(self.dim)
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma!r}")


@dataclass(frozen=True)
class GpKernelParams:
    """Second-order statistics of a stationary Gaussian-process loss.

    ``k1`` is the kernel's first derivative at zero and ``k2`` its second
    derivative at zero. The induced Hessian has entry covariance
    ``k2 * (d_ik d_jl + d_il d_jk) + k1**2 * d_ij d_kl``.
    """

    dim: int
    k1: float
    k2: float

    def __post_init__(self):
        _check_dim(self.dim)
        if not self.k2 >= 0:
            raise ValidationError(f"k2 must be non-negative, got {self.k2!r}")


def sample_goe(params: GoeParams, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, params.sigma, size=(params.dim, params.dim))
    return (a + a.T) / np.sqrt(2.0)


def sample_gp_hessian(params: GpKernelParams, seed: int) -> np.ndarray:
    """Draw ``sqrt(k2) * W + k1 * xi * I`` with ``W`` unit GOE and scalar ``xi ~ N(0, 1)``.

    The diagonal shift is shared by all entries, which is what produces the
    ``k1**2`` covariance between distinct diagonal entries.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((params.dim, params.dim))
    w = (a + a.T) / np.sqrt(2.0)
    xi = rng.standard_normal()
    h = np.sqrt(params.k2) * w
    h[np.diag_indices(params.dim)] += params.k1 * xi
    return h


def pad_with_zeros(m, target_dim: int) -> np.ndarray:
    """Embed ``m`` in the top-left block of a ``target_dim`` zero matrix."""
    a = check_symmetric(m)
    if target_dim < a.shape[0]:
        raise DimensionError(f"target_dim {target_dim} is smaller than matrix dim {a.shape[0]}")
    out = np.zeros((target_dim, target_dim))
    out[: a.shape[0], : a.shape[0]] = a
    return out


def add_diagonal_outliers(m, count: int, magnitude: float, seed: int) -> np.ndarray:
    """Add ``magnitude`` to ``count`` distinct, randomly chosen diagonal entries."""
    a = check_symmetric(m).copy()
    n = a.shape[0]
    if count < 1 or count > n:
        raise DimensionError(f"outlier count {count} must lie in [1, {n}]")
    idx = np.random.default_rng(seed).choice(n, size=count, replace=False)
    a[idx, idx] += magnitude
    return a


def default_outlier_magnitude(dim: int, sigma: float = 1.0) -> float:
    """Ten times the semicircle bulk edge ``2 * sigma * sqrt(dim)``."""
    return 10.0 * 2.0 * sigma * np.sqrt(dim)


def sample_poisson_spectrum(dim: int, seed: int) -> Spectrum:
    """Sorted i.i.d. uniform points on ``[0, dim]`` (unit mean density)."""
    _check_dim(dim)
    if dim < 2:
        raise ValidationError("a Poisson spectrum needs dim >= 2")
    rng = np.random.default_rng(seed)
    return Spectrum(np.sort(rng.uniform(0.0, dim, size=dim)))


@dataclass(frozen=True)
class OutlierSpec:
    count: int
    magnitude: Optional[float] = None


@dataclass(frozen=True)
class EnsembleSpec:
    """Serializable description of an ensemble and how many draws to take.

    When ``pad_to`` and ``outliers`` are both given, outliers are added
    before padding. An outlier ``magnitude`` of ``None`` means
    :func:`default_outlier_magnitude` for the effective off-diagonal scale.
    """

    kind: str
    dim: int
    n_samples: int = 100
    seed: int = 0
    sigma: float = 1.0
    k1: Optional[float] = None
    k2: Optional[float] = None
    pad_to: Optional[int] = None
    outliers: Optional[OutlierSpec] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        _check_dim(self.dim)
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")
        if self.kind == "gp_hessian" and (self.k1 is None or self.k2 is None):
            raise ValidationError("gp_hessian requires k1 and k2")
        if isinstance(self.outliers, dict):
            object.__setattr__(self, "outliers", OutlierSpec(**self.outliers))
        if self.kind == "poisson" and (self.pad_to is not None or self.outliers is not None):
            raise ValidationError("padding and outliers apply to matrix ensembles only")
        if self.pad_to is not None and self.pad_to < self.dim:
            raise DimensionError("pad_to must be at least dim")
        # Eagerly validate the parameter records.
        self.params()

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown ensemble fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}

    def params(self):
        if self.kind == "goe":
            return GoeParams(self.dim, self.sigma)
        if self.kind == "gp_hessian":
            return GpKernelParams(self.dim, self.k1, self.k2)
        return None

    def bulk_scale(self) -> float:
        """Off-diagonal standard deviation of one draw."""
        if self.kind == "gp_hessian":
            return float(np.sqrt(self.k2))
        return float(self.sigma)

    def draw(self, index: int):
        """Return draw ``index``: a matrix, or a :class:`Spectrum` for ``poisson``."""
        seed = self.seed + index
        if self.kind == "poisson":
            return sample_poisson_spectrum(self.dim, seed)
        if self.kind == "goe":
            m = sample_goe(self.params(), seed)
        else:
            m = sample_gp_hessian(self.params(), seed)
        if self.outliers is not None:
            mag = self.outliers.magnitude
            if mag is None:
                mag = default_outlier_magnitude(self.dim, self.bulk_scale())
            # Separate stream so outlier positions do not reuse matrix entropy.
            out_seed = np.random.SeedSequence([seed, 1])
            m = add_diagonal_outliers(m, self.outliers.count, mag, out_seed)
        if self.pad_to is not None:
            m = pad_with_zeros(m, self.pad_to)
        return m
