"""Bootstrap inference for the k-th largest coordinate of a high-dimensional normalized sum."""

from .errors import (
    ConfigError,
    DegenerateLayout,
    DomainError,
    EmptyInput,
    InvalidRho,
    InvalidSecondLevelLaw,
    KthBootError,
    LengthError,
    NonPositiveDefinite,
    NotDiagonal,
    WindowError,
)

__version__ = "0.1.0"
