"""The :class:`Spectrum` value type and symmetric-matrix validation."""

from dataclasses import dataclass, field

import numpy as np

from rmtspacings.errors import DimensionError, ValidationError


@dataclass(frozen=True)
class Spectrum:
    """Ascending real eigenvalues of one matrix.

    ``values`` is stored as a read-only float64 array. ``dim`` is the number
    of retained eigenvalues.
    """

    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size > 1 and np.any(np.diff(v) < 0):
            raise ValidationError("spectrum values must be sorted ascending")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Spectrum):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None

    @classmethod
    def from_unsorted(cls, values, meta=None):
        return cls(np.sort(np.asarray(values, dtype=np.float64)), meta or {})


def check_symmetric(m) -> np.ndarray:
    """Return ``m`` as a square float64 array, raising unless exactly symmetric."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        asym = float(np.max(np.abs(a - a.T)))
        raise ValidationError(f"matrix is not symmetric (max |a_ij - a_ji| = {asym:.3e})")
    return a
