"""Shared exception types."""


class InvalidInputError(ValueError):
    """An argument violates an operation's contract."""


class TrainingDivergedError(RuntimeError):
    """Network training produced a non-finite loss or weights."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class IngestionError(ValueError):
    """A CSV file cannot be parsed into a dataset."""

    def __init__(self, message: str, columns: tuple[str, ...] = ()):
        self.columns = tuple(columns)
        super().__init__(message)


class ConfigError(ValueError):
    """An experiment configuration is invalid or infeasible."""


class UndefinedImprovementError(ValueError):
    """Relative improvement is undefined because the parent statistic is zero."""
