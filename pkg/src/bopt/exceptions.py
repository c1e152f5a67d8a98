"""Exception and warning types shared across the package."""


class ConditioningError(RuntimeError):
    """Kernel matrix stayed non-positive-definite after the full jitter ladder."""


class InvalidObjectiveError(ValueError):
    """An objective returned a non-finite value; the message names the point."""


class StateConflictError(RuntimeError):
    """An operation that requires a different session state (e.g. recording a
    choice when no pair is outstanding)."""


class HyperparameterFitWarning(UserWarning):
    """Every start of the hyperparameter search failed; a wide fallback
    kernel spec was returned instead of a fitted one."""
