"""Exception types shared across the package."""


class NumericError(RuntimeError):
    """A numerical computation failed or left its domain of validity."""


class NonConvergenceError(NumericError):
    """An iteration hit its budget; carries the best iterate seen."""

    def __init__(self, message, best=None, best_norm=None):
        super().__init__(message)
        self.best = best
        self.best_norm = best_norm


class SingularMatrixError(NumericError):
    """A linear solve met an (effectively) singular matrix."""


class DegenerateOrbitError(NumericError):
    """The periodic-orbit map is singular; the orbit is not isolated."""


class GrazingError(NumericError):
    """The feedback signal is tangent to the ramp at the switching instant."""


class NoSnbInBracketError(NumericError):
    """A bifurcation locator was given a bracket with no branch merge inside."""


class UnsupportedSchemeError(ValueError):
    """Topology/control combination outside what the builders cover."""


class EvaluationError(ValueError):
    """A user-supplied function returned a non-finite value."""


class ConfigError(ValueError):
    """A configuration document failed parsing or schema validation."""
