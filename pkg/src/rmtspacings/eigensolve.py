"""Eigenvalues of dense real-symmetric matrices.

The default solver reduces the matrix to tridiagonal form with Householder
reflections and then runs implicitly shifted QL iterations on the
tridiagonal, computing eigenvalues only. Both stages are compiled with numba
and are single-threaded, so results are bit-reproducible.

Exactly decoupled blocks (for example zero rows and columns from padding or
dead units) are preserved by both stages, so their eigenvalues come out as
exact zeros rather than roundoff.
"""

import math

import numpy as np
from numba import njit

from rmtspacings.errors import NumericalError, ValidationError
from rmtspacings.spectrum import Spectrum, check_symmetric

MAX_SWEEPS = 50


@njit(cache=True, nogil=True)
def _householder_tridiagonal(a):
    """Reduce symmetric ``a`` (overwritten) to tridiagonal ``(d, e)``.

    ``e[k]`` couples rows ``k`` and ``k + 1``. Only the trailing submatrix is
    updated at each step, working on rows so memory access stays contiguous.
    """
    n = a.shape[0]
    d = np.empty(n)
    e = np.zeros(max(n - 1, 0))
    v = np.empty(n)
    p = np.empty(n)
    for k in range(n - 2):
        m = n - k - 1
        scale = 0.0
        for i in range(m):
            scale += abs(a[k, k + 1 + i])
        if scale == 0.0:
            e[k] = 0.0
            continue
        sq = 0.0
        for i in range(m):
            v[i] = a[k, k + 1 + i] / scale
            sq += v[i] * v[i]
        alpha = np.sqrt(sq)
        if v[0] > 0.0:
            alpha = -alpha
        vnorm2 = sq - alpha * v[0]
        v[0] -= alpha
        # H = I - v v^T / vnorm2 maps the scaled row onto alpha * e_1.
        e[k] = alpha * scale
        beta = 1.0 / vnorm2
        for i in range(m):
            s = 0.0
            row = k + 1 + i
            for j in range(m):
                s += a[row, k + 1 + j] * v[j]
            p[i] = beta * s
        kk = 0.0
        for i in range(m):
            kk += v[i] * p[i]
        kk *= 0.5 * beta
        for i in range(m):
            p[i] -= kk * v[i]
        for i in range(m):
            row = k + 1 + i
            vi = v[i]
            pi = p[i]
            for j in range(m):
                a[row, k + 1 + j] -= vi * p[j] + pi * v[j]
    for i in range(n):
        d[i] = a[i, i]
    if n >= 2:
        e[n - 2] = a[n - 2, n - 1]
    return d, e


# Couplings this small relative to the (unit-scaled) block cannot move any
# eigenvalue by a representable amount, yet their products underflow and
# stall the rotations.
_TINY = math.sqrt(np.finfo(np.float64).tiny)


@njit(cache=True, nogil=True)
def _negligible(off, d, m, eps):
    return abs(off[m]) <= eps * (abs(d[m]) + abs(d[m + 1]))


@njit(cache=True, nogil=True)
def _negligible_scaled(off, d, m, eps):
    return abs(off[m]) <= eps * (abs(d[m]) + abs(d[m + 1])) or abs(off[m]) <= _TINY


@njit(cache=True, nogil=True)
def _pow2_scale(x):
    """Power of two ``s`` with ``s * x`` in ``[1, 2)``, within the normal exponent range."""
    k = math.floor(math.log2(x))
    k = min(max(k, -1000), 1000)
    return 2.0 ** (-k)


@njit(cache=True, nogil=True)
def _reverse(a, lo, hi):
    while lo < hi:
        t = a[lo]
        a[lo] = a[hi]
        a[hi] = t
        lo += 1
        hi -= 1


@njit(cache=True, nogil=True)
def _tridiagonal_ql(d, e, max_sweeps):
    """Implicit QL with Wilkinson-style shifts; eigenvalues overwrite ``d``.

    The matrix is split into unreduced blocks wherever an off-diagonal is
    below machine epsilon times its two diagonal neighbours. A block whose
    first diagonal entry is larger in magnitude than its last is reversed
    before iterating (equivalent to QR on the original block), so graded
    blocks, such as clusters of roundoff-sized eigenvalues next to large
    ones, deflate from the small end and converge quickly. Each block is
    scaled by an exact power of two to unit size while it iterates, and
    couplings below ``sqrt(tiny)`` of that size are dropped, which keeps
    rotations from underflowing.

    Returns -1 on success or the index (within the possibly reversed
    block) of the eigenvalue that failed to converge within ``max_sweeps``
    sweeps.
    """
    n = d.shape[0]
    if n == 1:
        return -1
    off = np.zeros(n)
    off[: n - 1] = e
    eps = np.finfo(np.float64).eps
    l1 = 0
    while l1 < n:
        lend = l1
        while lend < n - 1:
            if _negligible(off, d, lend, eps):
                off[lend] = 0.0
                break
            lend += 1
        start = l1
        l1 = lend + 1
        if lend == start:
            continue
        if abs(d[lend]) < abs(d[start]):
            _reverse(d, start, lend)
            _reverse(off, start, lend - 1)
        # Exact power-of-two scaling of the block to unit size.
        anorm = 0.0
        for i in range(start, lend + 1):
            anorm = max(anorm, abs(d[i]), abs(off[i]) if i < lend else 0.0)
        scl = _pow2_scale(anorm)
        for i in range(start, lend + 1):
            d[i] *= scl
            if i < lend:
                off[i] *= scl
        for l in range(start, lend + 1):
            sweeps = 0
            while True:
                m = l
                while m < lend:
                    if _negligible_scaled(off, d, m, eps):
                        break
                    m += 1
                if m == l:
                    break
                if sweeps == max_sweeps:
                    return l
                sweeps += 1
                g = (d[l + 1] - d[l]) / (2.0 * off[l])
                r = np.hypot(g, 1.0)
                g = d[m] - d[l] + off[l] / (g + (r if g >= 0.0 else -r))
                s = 1.0
                c = 1.0
                p = 0.0
                i = m - 1
                underflow = False
                while i >= l:
                    f = s * off[i]
                    b = c * off[i]
                    r = np.hypot(f, g)
                    off[i + 1] = r
                    if r == 0.0:
                        d[i + 1] -= p
                        off[m] = 0.0
                        underflow = True
                        break
                    s = f / r
                    c = g / r
                    g = d[i + 1] - p
                    r = (d[i] - g) * s + 2.0 * c * b
                    p = s * r
                    d[i + 1] = g + p
                    g = c * r - b
                    i -= 1
                if underflow:
                    continue
                d[l] -= p
                off[l] = g
                off[m] = 0.0
        for i in range(start, lend + 1):
            d[i] /= scl
    return -1


def tridiagonalize(m):
    """Return the diagonal and off-diagonal of a tridiagonal form of ``m``."""
    a = np.array(check_symmetric(m), dtype=np.float64, order="C", copy=True)
    return _householder_tridiagonal(a)


def tridiagonal_eigvals(d, e, max_sweeps=MAX_SWEEPS) -> np.ndarray:
    d = np.array(d, dtype=np.float64, copy=True)
    e = np.asarray(e, dtype=np.float64)
    if e.shape[0] != max(d.shape[0] - 1, 0):
        raise ValidationError("off-diagonal must have length len(d) - 1")
    failed = _tridiagonal_ql(d, e, max_sweeps)
    if failed >= 0:
        raise NumericalError(
            f"QL iteration did not converge for eigenvalue {failed} after {max_sweeps} sweeps",
            index=int(failed),
        )
    return np.sort(d)


def eigvals_symmetric(m, method: str = "ql") -> Spectrum:
    """All eigenvalues of a real-symmetric matrix, ascending.

    ``method="lapack"`` delegates to :func:`numpy.linalg.eigvalsh` and is
    intended for cross-checks and large matrices.
    """
    a = check_symmetric(m)
    if method == "ql":
        d, e = _householder_tridiagonal(np.array(a, order="C", copy=True))
        return Spectrum(tridiagonal_eigvals(d, e))
    if method == "lapack":
        return Spectrum(np.linalg.eigvalsh(a))
    raise ValidationError(f"unknown eigensolver method {method!r}")
