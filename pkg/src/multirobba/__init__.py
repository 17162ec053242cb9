"""Finite-precision computations in multivariate Robba rings over Q_p."""

__version__ = "0.1.0"

from .errors import (InvalidArgumentError, ParseError, PrecisionError, RegimeError, RobbaError,
                     ValidationError)
from .padic import PadicScalar
from .laurent import Box, LaurentBoxSeries, MultiInterval

__all__ = [
    "Box", "InvalidArgumentError", "LaurentBoxSeries", "MultiInterval", "PadicScalar", "ParseError",
    "PrecisionError", "RegimeError", "RobbaError", "ValidationError", "__version__",
]
