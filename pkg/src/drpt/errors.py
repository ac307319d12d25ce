"""Exception types raised across the package."""


class DRPTError(Exception):
    """Base class for all errors raised by drpt."""


class NonPositiveRatio(DRPTError, ValueError):
    pass


class DomainMismatch(DRPTError, ValueError):
    pass


class NoBracket(DRPTError, ValueError):
    pass


class NoConvergence(DRPTError, RuntimeError):
    pass


class TooLarge(DRPTError, ValueError):
    pass


class DegenerateSample(DRPTError, ValueError):
    pass


class LambdaMismatch(DRPTError, ValueError):
    pass


class TooFewPoints(DRPTError, ValueError):
    pass


class EmptyDictionary(DRPTError, ValueError):
    pass


class InvalidTable(DRPTError, ValueError):
    pass


class InfeasibleTotals(DRPTError, ValueError):
    pass


class OutOfRange(DRPTError, ValueError):
    pass


class EmptyCandidates(DRPTError, ValueError):
    pass


class ZeroCell(DRPTError, ValueError):
    pass


class EstimatorFailure(DRPTError, RuntimeError):
    pass


class SeparableData(EstimatorFailure):
    pass


class AllRejectedWarning(UserWarning):
    """Rejection sampling kept no first-sample point."""
