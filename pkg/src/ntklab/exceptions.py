"""Exception hierarchy shared across ntklab."""


class NtkLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(NtkLabError, ValueError):
    """An argument violates a documented precondition."""


class SingularMatrixError(NtkLabError, ArithmeticError):
    """A linear system could not be solved even after the eigen fallback."""

    def __init__(self, message, smallest_pivot):
        super().__init__(f"{message} (smallest pivot {smallest_pivot:.3e})")
        self.smallest_pivot = smallest_pivot


class FormatError(NtkLabError, ValueError):
    """A data file does not follow the expected binary layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)
        self.offset = offset


class ZeroImageError(FormatError):
    """An image has no non-zero pixel, so it cannot be scaled to unit norm."""


class InsufficientDataError(NtkLabError, ValueError):
    """A class has too few samples for a pairwise statistic."""

    def __init__(self, label, count):
        super().__init__(f"class {label!r} has {count} sample(s); at least 2 are required")
        self.label = label
        self.count = count


class PreconditionError(NtkLabError, ValueError):
    """A bound was evaluated outside the regime where it applies."""


class DivergenceError(NtkLabError, FloatingPointError):
    """Training produced a non-finite loss or an exploding output."""

    def __init__(self, step, message="training diverged"):
        super().__init__(f"{message} at step {step}")
        self.step = step
