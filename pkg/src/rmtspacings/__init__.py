"""Local spectral statistics of random matrices and neural-network Hessians."""

from rmtspacings.errors import (
    DimensionError,
    NumericalError,
    ParseError,
    ResourceError,
    RmtError,
    SchemaError,
    TrainingError,
    ValidationError,
)
from rmtspacings.spectrum import Spectrum

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "NumericalError",
    "ParseError",
    "ResourceError",
    "RmtError",
    "SchemaError",
    "Spectrum",
    "TrainingError",
    "ValidationError",
]
