"""Exception types shared across the package."""


class MonotoneError(Exception):
    """Base class for all package errors."""


class OutOfDomainError(MonotoneError, ValueError):
    """A sphere, ball, layer or window leaves the grid that carries the data."""


class SingularTimeError(MonotoneError, ValueError):
    """The backward heat kernel was evaluated at its singular time t = t0."""


class ModelDomainError(MonotoneError, ValueError):
    """A nonlinearity was evaluated outside its admissible u-range."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class ConvergenceError(MonotoneError, RuntimeError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class FieldNotSolutionError(MonotoneError):
    """A field failed the integration-by-parts gate that certifies it as a solution."""

    def __init__(self, message, residual=None, tolerance=None):
        super().__init__(message)
        self.residual = residual
        self.tolerance = tolerance


class HypothesisError(MonotoneError, ValueError):
    """A standing hypothesis (e.g. the center lying in the coincidence set) fails."""


class ConfigError(MonotoneError, ValueError):
    """Malformed or inconsistent run configuration."""


class SingularOriginError(MonotoneError, ValueError):
    """A negative-degree homogeneous field was requested at its singular center."""


class DegreeUndefinedError(MonotoneError, ValueError):
    """The field vanishes on a probe sphere, so no homogeneity degree can be fitted."""
