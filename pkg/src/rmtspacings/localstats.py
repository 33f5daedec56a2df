"""Local spectral statistics and their universal reference laws.

Densities and CDFs accept scalars or arrays. The reference laws are

* Wigner surmise ``(pi s / 2) exp(-pi s^2 / 4)`` for unit-mean GOE spacings,
* the GOE ratio surmise ``27 (r + r^2) / (8 (1 + r + r^2)^(5/2))``,
* the Poisson law ``exp(-s)`` for independent levels,
* the semicircle of radius ``2 sigma sqrt(P)``.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import least_squares

from rmtspacings.errors import ValidationError
from rmtspacings.spectrum import Spectrum

DEFAULT_TRUNCATION = 10.0
DEFAULT_BINS = 50


def _nonneg(x, name):
    a = np.asarray(x, dtype=np.float64)
    if np.any(a < 0) or np.any(np.isnan(a)):
        raise ValidationError(f"{name} requires non-negative input")
    return a


def _out(a):
    return a if a.ndim else float(a)


def wigner_surmise_pdf(s):
    s = _nonneg(s, "wigner_surmise_pdf")
    return _out(0.5 * math.pi * s * np.exp(-0.25 * math.pi * s * s))


def wigner_surmise_cdf(s):
    s = _nonneg(s, "wigner_surmise_cdf")
    return _out(-np.expm1(-0.25 * math.pi * s * s))


def wigner_surmise_ppf(u):
    """Inverse CDF, for sampling."""
    u = np.asarray(u, dtype=np.float64)
    return _out(np.sqrt(-4.0 / math.pi * np.log1p(-u)))


def ratio_surmise_pdf(r):
    r = _nonneg(r, "ratio_surmise_pdf")
    u = 1.0 + r + r * r
    return _out(27.0 * (r + r * r) / (8.0 * u**2.5))


def ratio_surmise_cdf(r):
    """Closed form ``1/2 + (2r^3 + 3r^2 - 3r - 2) / (4 (1 + r + r^2)^(3/2))``."""
    r = _nonneg(r, "ratio_surmise_cdf")
    u = 1.0 + r + r * r
    with np.errstate(over="ignore", invalid="ignore"):
        val = 0.5 + (2.0 * r**3 + 3.0 * r * r - 3.0 * r - 2.0) / (4.0 * u**1.5)
    val = np.where(np.isinf(r), 1.0, val)
    return _out(val)


def truncated_ratio_cdf(truncation: float = DEFAULT_TRUNCATION) -> Callable:
    """CDF of the ratio surmise conditioned on ``r <= truncation``."""
    mass = ratio_surmise_cdf(truncation)

    def cdf(r):
        return np.minimum(np.asarray(ratio_surmise_cdf(r)) / mass, 1.0)

    return cdf


def poisson_pdf(s):
    s = _nonneg(s, "poisson_pdf")
    return _out(np.exp(-s))


def poisson_cdf(s):
    s = _nonneg(s, "poisson_cdf")
    return _out(-np.expm1(-s))


def semicircle_pdf(lam, dim: int, sigma: float = 1.0):
    lam = np.asarray(lam, dtype=np.float64)
    r2 = 4.0 * dim * sigma * sigma
    val = np.sqrt(np.maximum(r2 - lam * lam, 0.0)) / (2.0 * math.pi * sigma * sigma * dim)
    return _out(val)


def semicircle_cdf(lam, dim: int, sigma: float = 1.0):
    lam = np.asarray(lam, dtype=np.float64)
    radius = 2.0 * sigma * math.sqrt(dim)
    x = np.clip(lam / radius, -1.0, 1.0)
    val = 0.5 + (x * np.sqrt(1.0 - x * x) + np.arcsin(x)) / math.pi
    return _out(val)


REFERENCE_CDFS = {
    "wigner": wigner_surmise_cdf,
    "poisson": poisson_cdf,
    "ratio": ratio_surmise_cdf,
}


@dataclass(frozen=True)
class RatioSample:
    """Consecutive spacing ratios at or below ``truncation``."""

    ratios: np.ndarray
    truncation: float = DEFAULT_TRUNCATION
    n_dropped: int = 0

    @property
    def n_total(self) -> int:
        return self.ratios.size + self.n_dropped

    @property
    def retained_fraction(self) -> float:
        return self.ratios.size / self.n_total if self.n_total else float("nan")


def raw_spacing_ratios(values) -> np.ndarray:
    """Untruncated ratios ``(l_i - l_{i-1}) / (l_{i-1} - l_{i-2})``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 3:
        raise ValidationError("spacing ratios need at least three eigenvalues")
    gaps = np.diff(v)
    den = gaps[:-1]
    zero = np.flatnonzero(den == 0)
    if zero.size:
        i = int(zero[0])
        raise ValidationError(
            f"zero gap between eigenvalues {i} and {i + 1}; filter degenerate eigenvalues first"
        )
    return gaps[1:] / den


def spacing_ratios(s: Spectrum, truncation: float = DEFAULT_TRUNCATION) -> RatioSample:
    if not truncation > 0:
        raise ValidationError("truncation must be positive")
    r = raw_spacing_ratios(s.values)
    keep = r <= truncation
    return RatioSample(r[keep], float(truncation), int(r.size - keep.sum()))


def pool_ratios(spectra, truncation: float = DEFAULT_TRUNCATION) -> RatioSample:
    """Ratios of every spectrum with at least three levels, concatenated."""
    parts, dropped = [], 0
    for s in spectra:
        if s.dim < 3:
            continue
        rs = spacing_ratios(s, truncation)
        parts.append(rs.ratios)
        dropped += rs.n_dropped
    ratios = np.concatenate(parts) if parts else np.empty(0)
    return RatioSample(ratios, float(truncation), dropped)


@dataclass(frozen=True)
class GofReport:
    ks_statistic: float
    n_samples: int
    reference: str = ""


def ks_statistic(samples, reference_cdf: Callable, reference: str = "") -> GofReport:
    """Exact two-sided Kolmogorov-Smirnov distance to a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValidationError("ks_statistic needs at least one sample")
    f = np.asarray(reference_cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1) / n)))
    return GofReport(min(max(d, 0.0), 1.0), int(n), reference)


@dataclass(frozen=True)
class SpectralHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    n_clipped: int = 0

    @property
    def n_retained(self) -> int:
        return int(self.counts.sum())

    @property
    def clipped_fraction(self) -> float:
        total = self.n_retained + self.n_clipped
        return self.n_clipped / total if total else 0.0


def histogram(samples, n_bins: int = DEFAULT_BINS, range=(0.0, 4.0)) -> SpectralHistogram:
    """Equal-width histogram on ``[lo, hi]`` (right edge inclusive).

    Samples outside the range are tallied in ``n_clipped``; ``density`` is
    normalized by the total sample count, so it integrates to the retained
    fraction.
    """
    lo, hi = float(range[0]), float(range[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValidationError(f"invalid histogram range ({lo}, {hi})")
    if int(n_bins) != n_bins or n_bins < 1:
        raise ValidationError("n_bins must be a positive integer")
    x = np.asarray(samples, dtype=np.float64).ravel()
    inside = (x >= lo) & (x <= hi)
    counts, edges = np.histogram(x[inside], bins=int(n_bins), range=(lo, hi))
    total = x.size
    width = np.diff(edges)
    density = counts / (total * width) if total else np.zeros(n_bins)
    return SpectralHistogram(edges, counts, density, int(total - inside.sum()))


def semicircle_bin_density(edges, center: float, radius: float) -> np.ndarray:
    """Bin averages of a unit-mass semicircle with the given center and radius."""
    edges = np.asarray(edges, dtype=np.float64)
    x = np.clip((edges - center) / radius, -1.0, 1.0)
    cdf = 0.5 + (x * np.sqrt(1.0 - x * x) + np.arcsin(x)) / math.pi
    return np.diff(cdf) / np.diff(edges)


def fit_semicircle(values, n_bins: int = DEFAULT_BINS):
    """Least-squares fit ``(center, radius)`` of a semicircle to binned data.

    Starts from moment matching (the semicircle variance is ``radius^2 / 4``).
    """
    v = np.asarray(values, dtype=np.float64)
    c0, r0 = float(v.mean()), 2.0 * float(v.std())
    if r0 == 0:
        raise ValidationError("cannot fit a semicircle to a constant sample")
    lo, hi = float(v.min()), float(v.max())
    h = histogram(v, n_bins, (lo, hi))

    def resid(p):
        return semicircle_bin_density(h.bin_edges, p[0], abs(p[1])) - h.density

    sol = least_squares(resid, x0=[c0, r0], x_scale=[r0, r0])
    return float(sol.x[0]), float(abs(sol.x[1]))


def semicircle_deviation(values, n_bins: int = DEFAULT_BINS, center=None, radius=None) -> float:
    """Max absolute binned-density error against a semicircle, relative to the peak height.

    Without ``center``/``radius``, the best-fit semicircle is used. Bins span
    the sample range.
    """
    v = np.asarray(values, dtype=np.float64)
    if center is None or radius is None:
        center, radius = fit_semicircle(v, n_bins)
    h = histogram(v, n_bins, (float(v.min()), float(v.max())))
    ref = semicircle_bin_density(h.bin_edges, center, radius)
    peak = 2.0 / (math.pi * radius)
    return float(np.max(np.abs(h.density - ref)) / peak)
