"""Exception hierarchy shared across the package."""


class TeleSimError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TeleSimError, ValueError):
    """An input value violates a documented invariant."""


class ConfigurationError(TeleSimError, ValueError):
    """A run configuration is internally inconsistent or out of range."""


class CalibrationError(TeleSimError, ValueError):
    """A calibration utility produced a value outside its admissible range."""


class LogicError(TeleSimError, RuntimeError):
    """An operation was applied to a state in which it is undefined."""
