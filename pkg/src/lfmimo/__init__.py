"""Limited-feedback multiuser MIMO downlink: RVQ feedback, robust linear and WMMSE precoding, Monte-Carlo harness."""

from .errors import ConfigError, DomainError, LFMimoError, NumericalError, ValidationError
from .numerics import SeedStream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "LFMimoError",
    "NumericalError",
    "ValidationError",
    "SeedStream",
    "__version__",
]
