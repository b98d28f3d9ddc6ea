"""Exception and warning types raised across packsel."""


class PackselError(ValueError):
    """Base class for all data and contract errors raised by packsel."""


class DimensionMismatchError(PackselError):
    pass


class LengthMismatchError(PackselError):
    pass


class EmptyInputError(PackselError):
    pass


class IndexOutOfRangeError(PackselError):
    pass


class InfeasibleProductError(PackselError):
    """Some product has every package type masked out."""

    def __init__(self, rows, message=None):
        self.rows = list(rows)
        super().__init__(message or f"no feasible package type for product rows {self.rows[:10]}")


class InfeasibleAssignmentError(PackselError):
    pass


class NegativeLambdaError(PackselError):
    pass


class SingleClassDataError(PackselError):
    pass


class NonFiniteFeatureError(PackselError):
    pass


class DomainError(PackselError):
    pass


class InstanceTooLargeError(PackselError):
    pass


class NoFeasibleSolutionError(PackselError):
    pass


class PropertyViolationError(AssertionError):
    """A proven structural property failed; indicates an implementation bug."""


class ConvergenceWarning(UserWarning):
    pass
