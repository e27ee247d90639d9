"""Exception types raised across the package."""


class KthBootError(Exception):
    """Base class for package errors."""


class DomainError(KthBootError, ValueError):
    """An argument lies outside the domain of the function."""


class InvalidRho(DomainError):
    pass


class NonPositiveDefinite(KthBootError, ValueError):
    pass


class EmptyInput(KthBootError, ValueError):
    pass


class InvalidSecondLevelLaw(KthBootError, ValueError):
    """Second-level multipliers must have a unit third moment."""


class NotDiagonal(KthBootError, ValueError):
    pass


class WindowError(DomainError):
    pass


class DegenerateLayout(KthBootError, ValueError):
    """Block layout has no complete main block (q_d = 0)."""


class LengthError(KthBootError, ValueError):
    pass


class ConfigError(KthBootError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
