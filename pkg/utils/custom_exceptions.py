class RobustControlError(Exception):
    """Base class for every failure the library reports to its callers."""

    code = "internal_error"
    exit_code = 1

    def __init__(self, message: str = "Unexpected failure."):
        self.message = message
        super().__init__(self.message)


class InvalidConfigError(RobustControlError, ValueError):
    code = "invalid_config"
    exit_code = 2


class InvalidInputError(RobustControlError, ValueError):
    code = "invalid_input"
    exit_code = 3


class DataError(RobustControlError):
    code = "data_error"
    exit_code = 3


class CapacityError(InvalidInputError):
    """Raised when an exact computation is asked to handle more atoms than it can."""

    code = "capacity_exceeded"


class IncompleteArtifactsError(DataError):
    code = "incomplete_artifacts"


class ConditioningError(RobustControlError):
    """
    Raised when a kernel matrix cannot be factorized even after jitter.

    `suggested_jitter` is the value the caller should retry with.
    """

    code = "ill_conditioned"

    def __init__(self, message: str, suggested_jitter: float | None = None):
        self.suggested_jitter = suggested_jitter
        super().__init__(message)


class SolverError(RobustControlError):
    code = "solver_failure"


class NonConvergenceAbort(RobustControlError):
    code = "non_convergence"
    exit_code = 4

    def __init__(self, message: str, failed: int = 0, total: int = 0):
        self.failed = failed
        self.total = total
        super().__init__(message)
