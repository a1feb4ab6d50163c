"""Exception types shared across the package."""


class GanBalanceError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GanBalanceError, ValueError):
    """Operator received operands with incompatible shapes."""


class CheckpointError(GanBalanceError):
    """Checkpoint file is missing, truncated or not ours."""


class CorpusError(GanBalanceError, ValueError):
    """Malformed dataset rows, bad schema or impossible split."""


class TrainingDiverged(GanBalanceError):
    """Gradients went non-finite or exploded; names the offending round."""


class HygieneError(GanBalanceError):
    """Synthetic records leaked somewhere only real data is allowed."""


class ConfigError(GanBalanceError, ValueError):
    """Experiment or training configuration failed validation."""
