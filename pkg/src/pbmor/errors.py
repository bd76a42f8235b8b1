"""Exception hierarchy shared by all pbmor modules."""


class PBMORError(Exception):
    """Base class for every error raised by pbmor."""


class InstanceTooLargeError(PBMORError):
    """A dense object would exceed the configured size cap."""


class ShiftAtEigenvalueError(PBMORError):
    """The shifted pencil sE - A is singular or numerically rank deficient."""


class DegenerateBasisError(PBMORError):
    """A basis does not have the column rank an operation requires."""


class CoefficientEvaluationError(PBMORError):
    """A coefficient function returned a non-finite value."""


class SingularMassError(PBMORError):
    """E(p) is singular at a queried parameter."""


class IllPosedReductionError(PBMORError):
    """The projected mass matrix is singular at a sampled parameter."""


class EmptyBasisError(PBMORError):
    """Truncation or compression left no columns."""
