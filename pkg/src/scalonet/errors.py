"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
TrainingDiverged -> 3.
"""


class ScalonetError(Exception):
    """Base class for all package errors."""


class ConfigError(ScalonetError):
    """Bad or incomplete pipeline configuration."""


class DataError(ScalonetError):
    """Unreadable, malformed, or inconsistent data artifacts."""


class CheckpointError(DataError):
    """Corrupt checkpoint file or spec/checkpoint digest mismatch."""


class TrainingDiverged(ScalonetError):
    """Loss became non-finite during optimization."""

    def __init__(self, epoch, batch, message="loss is not finite"):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
