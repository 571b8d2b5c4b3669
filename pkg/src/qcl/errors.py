"""Exception types raised across the package."""


class QclError(Exception):
    """Base class for all package errors."""


class NotHermitian(QclError, ValueError):
    pass


class ConvergenceFailure(QclError, ArithmeticError):
    pass


class DimensionMismatch(QclError, ValueError):
    pass


class NonFiniteField(QclError, ValueError):
    pass


class PhaseIndepSingularity(QclError, ArithmeticError):
    """|Tr(W^dag U)| vanished, so the phase-independent gate gradient is undefined."""


class InvalidObjective(QclError, ValueError):
    pass


class ZeroField(QclError, ValueError):
    pass


class NoValidTransitions(QclError, ValueError):
    """No coupled pair of non-degenerate levels, so the RFS is undefined."""


class InvalidT(QclError, ValueError):
    pass


class StepTooSmall(QclError, ArithmeticError):
    pass


class ConfigInvalid(QclError, ValueError):
    pass
