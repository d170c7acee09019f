"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument: wrong shape, out-of-range value, broken invariant."""


class ConditioningError(ArithmeticError):
    """A kernel system could not be solved stably.

    Attributes
    ----------
    condition_number : float
        Estimated 2-norm condition number of the offending matrix
        (``nan`` when it could not be estimated).
    """

    def __init__(self, message, condition_number=float("nan")):
        super().__init__(message)
        self.condition_number = condition_number


class StateError(RuntimeError):
    """An iterative procedure cannot continue (e.g. candidates exhausted)."""


class EvaluationError(RuntimeError):
    """An objective evaluation failed.

    ``partial`` holds whatever was computed before the failure (a list of
    observations, a partially filled table, ...), or ``None``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
