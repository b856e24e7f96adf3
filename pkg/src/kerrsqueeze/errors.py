"""Exception hierarchy shared by every module of the package."""


class KerrError(Exception):
    """Base class for all errors raised by kerrsqueeze."""


class InvalidParameterError(KerrError, ValueError):
    pass


class DomainError(KerrError, ValueError):
    """Requested object does not exist at the given parameters (e.g. no bright state)."""


class DegeneracyError(KerrError, ArithmeticError):
    pass


class FactorizationError(KerrError, ArithmeticError):
    pass


class InconsistencyError(KerrError, ArithmeticError):
    """Two independent routes to the same quantity disagree beyond tolerance."""

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values or {}


class DivergenceError(KerrError, ArithmeticError):
    def __init__(self, message, time=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


class EnsembleError(KerrError, RuntimeError):
    pass


class InsufficientDataError(KerrError, ValueError):
    pass


class ConfigError(KerrError, ValueError):
    pass
