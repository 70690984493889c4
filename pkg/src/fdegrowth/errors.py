"""Exception hierarchy shared by every module of the package."""


class FDEGrowthError(Exception):
    """Base class for all package errors."""


class ValidationError(FDEGrowthError, ValueError):
    """Invalid construction input (negative weights, bad locations, ...)."""


class QuadratureError(FDEGrowthError):
    """Adaptive quadrature failed to reach tolerance on some subinterval."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class DomainError(FDEGrowthError, ValueError):
    """Argument outside the domain of a transform."""


class StepFailure(FDEGrowthError):
    """Time stepping could not continue."""

    def __init__(self, message, last_good_time=None):
        super().__init__(message)
        self.last_good_time = last_good_time


class HypothesisViolation(FDEGrowthError):
    """A sampled check of a growth hypothesis failed."""


class ConfigError(FDEGrowthError):
    """Malformed or invalid experiment configuration."""

    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
