"""Exception hierarchy shared by all solver modules."""


class GLPinError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GLPinError):
    """An argument lies outside the domain an operation is defined on."""


class ConfigurationError(GLPinError):
    """Grids, mesh sizes or options cannot satisfy a stated contract."""


class DegenerateModelError(GLPinError):
    """The pinning level a = 1, where the interface problem degenerates."""


class SolverError(GLPinError):
    """An iterative or linear solve failed to converge.

    The message carries the final residual so failed runs are diagnosable.
    """


class PostconditionError(GLPinError):
    """A solver converged but its output violates a guaranteed bound.

    Raised instead of silently clipping the offending values.
    """


class NotApplicableError(GLPinError):
    """The operation is undefined for this input (wrong regime or state)."""


class UndefinedDegreeError(GLPinError):
    """A winding number could not be extracted reliably."""


class SingularInputError(GLPinError):
    """Input contains a genuine singularity (e.g. coincident vortex points)."""


class SweepRangeError(GLPinError):
    """A field sweep found no transition inside the requested range."""

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table
