"""Exception types raised by tuckervb."""


class DimensionError(ValueError):
    """Array sizes or shapes do not conform."""


class ModeError(IndexError):
    """Tensor mode index out of range."""


class RankError(ValueError):
    """Requested multilinear rank exceeds what the operator supports."""


class CapacityError(MemoryError):
    """Problem too large for a dense full-space computation."""


class SelectionError(RuntimeError):
    """A parameter-choice criterion is degenerate on the supplied system."""


class NumericalError(ArithmeticError):
    """A factorization failed or produced non-finite values.

    Attributes
    ----------
    condition_estimate : float
        Estimated 2-norm condition number of the offending matrix
        (``inf`` when it could not be estimated).
    """

    def __init__(self, message, condition_estimate=float("inf")):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate
