"""Unfolding of spectra onto unit mean spacing.

Two maps are provided: the closed-form mean counting function of the GOE and
an empirical counting function built from a pool of independent spectra. Pools
are split at random into a part used to build the map and a part that is
unfolded, so the map is never evaluated on its own data in an analysis.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from rmtspacings.errors import ValidationError
from rmtspacings.spectrum import Spectrum

DEFAULT_CUTOFF = 1e-20


def goe_analytic_cdf(lam, dim: int):
    """Mean number of GOE eigenvalues below ``lam`` (semicircle radius ``sqrt(2 * dim)``).

    Works elementwise on arrays and clamps to ``0`` and ``dim`` outside the
    support.
    """
    lam = np.asarray(lam, dtype=np.float64)
    edge = math.sqrt(2.0 * dim)
    x = np.clip(lam, -edge, edge)
    root = np.sqrt(np.maximum(2.0 * dim - x * x, 0.0))
    # arctan2 handles the edges where root == 0.
    val = dim * (0.5 + x * root / (2.0 * math.pi * dim) + np.arctan2(x, root) / math.pi)
    val = np.where(lam <= -edge, 0.0, np.where(lam >= edge, float(dim), val))
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class SpectrumPool:
    spectra: tuple
    provenance: str = ""

    def __post_init__(self):
        spectra = tuple(self.spectra)
        for i, s in enumerate(spectra):
            if not isinstance(s, Spectrum):
                raise ValidationError(f"pool entry {i} is not a Spectrum")
            if s.dim == 0:
                raise ValidationError(f"pool entry {i} is empty")
        object.__setattr__(self, "spectra", spectra)

    def __len__(self):
        return len(self.spectra)

    def pooled(self) -> np.ndarray:
        if not self.spectra:
            return np.empty(0)
        return np.sort(np.concatenate([s.values for s in self.spectra]))


class AnalyticGoeMap:
    """Unfolding by the exact GOE counting function.

    ``sigma`` is the off-diagonal standard deviation of the matrices being
    unfolded; eigenvalues are rescaled onto the ``sigma**2 = 1/2``
    normalization of :func:`goe_analytic_cdf`.
    """

    kind = "analytic"

    def __init__(self, dim: int, sigma: float = 1.0 / math.sqrt(2.0)):
        self.dim = int(dim)
        self.sigma = float(sigma)
        self._scale = 1.0 / (self.sigma * math.sqrt(2.0))

    def __call__(self, lam):
        return goe_analytic_cdf(np.asarray(lam) * self._scale, self.dim)


class EmpiricalMap:
    """Counting map estimated from pooled eigenvalues.

    ``raw_fraction(lam)`` is the fraction of pooled eigenvalues strictly
    below ``lam``. Calling the map returns that count divided by the number
    of pooled spectra, so adjacent unfolded levels of one spectrum are on
    average one unit apart.

    With ``interpolate=True`` (the default) the count is linearly
    interpolated between consecutive distinct pooled eigenvalues, with knot
    value ``k + 1/2`` at a value that has ``k`` pooled eigenvalues strictly
    below it. The pure step function makes every
    unfolded spacing a multiple of ``1 / n_spectra``, which biases
    distribution tests at the ``1 / (2 * n_spectra)`` level.
    """

    kind = "empirical"

    def __init__(self, pooled: np.ndarray, n_spectra: int, interpolate: bool = True):
        self.pooled = np.asarray(pooled, dtype=np.float64)
        self.pooled.flags.writeable = False
        self.n_spectra = int(n_spectra)
        self.scale = self.pooled.size / self.n_spectra
        self.interpolate = bool(interpolate)
        # Tied pool values share one knot so evaluation is well defined.
        self._xs, first = np.unique(self.pooled, return_index=True)
        self._knots = first + 0.5

    @property
    def size(self) -> int:
        return self.pooled.size

    def raw_fraction(self, lam):
        counts = np.searchsorted(self.pooled, lam, side="left")
        return counts / self.pooled.size

    def counts(self, lam):
        if self.interpolate:
            return np.interp(lam, self._xs, self._knots, left=0.0, right=float(self.pooled.size))
        return np.searchsorted(self.pooled, lam, side="left")

    def __call__(self, lam):
        # count / n_spectra == fraction * scale, without the extra rounding.
        return self.counts(lam) / self.n_spectra


class IdentityMap:
    """``lam -> lam``; for spectra already at unit density (e.g. Poisson baselines)."""

    kind = "identity"

    def __call__(self, lam):
        return np.asarray(lam, dtype=np.float64)


def build_empirical_cdf(pool: SpectrumPool, interpolate: bool = True) -> EmpiricalMap:
    if len(pool) == 0:
        raise ValidationError("cannot build an unfolding map from an empty pool")
    pooled = pool.pooled()
    if pooled.size == 0:
        raise ValidationError("pool holds no eigenvalues")
    return EmpiricalMap(pooled, len(pool), interpolate)


def filter_degenerate(s: Spectrum, cutoff: float = DEFAULT_CUTOFF):
    """Drop eigenvalues with ``|lam| < cutoff``.

    Returns ``(filtered, removed_fraction)``; the filtered spectrum may be
    empty.
    """
    if not cutoff > 0:
        raise ValidationError(f"cutoff must be positive, got {cutoff!r}")
    keep = np.abs(s.values) >= cutoff
    removed = 1.0 - keep.sum() / s.dim if s.dim else 0.0
    return Spectrum(s.values[keep], s.meta), float(removed)


def restrict_to_interval(s: Spectrum, lo: float, hi: float) -> Spectrum:
    """Keep eigenvalues in ``[lo, hi]``; used to strip outliers from a bulk."""
    if not lo < hi:
        raise ValidationError("need lo < hi")
    v = s.values
    return Spectrum(v[(v >= lo) & (v <= hi)], s.meta)


@dataclass(frozen=True)
class UnfoldedSpacings:
    spacings: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return self.spacings.size


def unfold(s: Spectrum, unfolding_map) -> UnfoldedSpacings:
    if s.dim < 2:
        raise ValidationError("unfolding needs at least two eigenvalues")
    levels = np.asarray(unfolding_map(s.values), dtype=np.float64)
    return UnfoldedSpacings(np.diff(levels))


def unfold_pool(pool: SpectrumPool, unfolding_map) -> np.ndarray:
    """Concatenated spacings, computed within each spectrum separately."""
    parts = [unfold(s, unfolding_map).spacings for s in pool.spectra if s.dim >= 2]
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass(frozen=True)
class SplitConfig:
    fit_fraction: float = 2.0 / 3.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.fit_fraction < 1.0:
            raise ValidationError(f"fit_fraction must lie in (0, 1), got {self.fit_fraction!r}")


def split_sizes(m: int, fit_fraction: float):
    # The small epsilon keeps exact products like (2/3) * 3 from rounding down.
    n_fit = math.floor(fit_fraction * m + 1e-9)
    return n_fit, m - n_fit


def split_pool_indices(m: int, cfg: SplitConfig = SplitConfig()):
    """Seeded sorted ``(fit_idx, analysis_idx)`` for a pool of ``m`` spectra."""
    if m < 3:
        raise ValidationError(f"need at least 3 spectra to split, got {m}")
    n_fit, n_analysis = split_sizes(m, cfg.fit_fraction)
    if n_fit < 1 or n_analysis < 1:
        raise ValidationError(f"fit_fraction {cfg.fit_fraction} leaves an empty side for m={m}")
    perm = np.random.default_rng(cfg.seed).permutation(m)
    return np.sort(perm[:n_fit]), np.sort(perm[n_fit:])


def split_pool(pool: SpectrumPool, cfg: SplitConfig = SplitConfig()):
    """Seeded random partition into ``(fit, analysis)`` pools."""
    fit_idx, ana_idx = split_pool_indices(len(pool), cfg)
    fit = SpectrumPool(tuple(pool.spectra[i] for i in fit_idx), pool.provenance + ":fit")
    analysis = SpectrumPool(tuple(pool.spectra[i] for i in ana_idx), pool.provenance + ":analysis")
    return fit, analysis
