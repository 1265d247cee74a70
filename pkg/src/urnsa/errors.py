"""Exception types shared across the package."""


class UrnsaError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(UrnsaError, ValueError):
    """Invalid experiment configuration; carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConvergenceError(UrnsaError, RuntimeError):
    """Iteration budget exhausted; carries the last residual."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class IntegrationError(UrnsaError, RuntimeError):
    """ODE step produced a non-finite value; carries the offending time."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} (t={time:g})")


class GeneratorContractError(UrnsaError, ValueError):
    """A replacement generator returned an invalid matrix."""


class NeedsMoreDataError(UrnsaError, ValueError):
    """A finite sequence was exhausted before a level crossing was bracketed."""
