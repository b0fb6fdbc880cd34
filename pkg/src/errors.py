"""
Exception hierarchy

Input problems are ValueErrors so callers that already catch ValueError keep
working. Inference failures carry the stage and tree level where they happened;
experiment runners record them as failed trials instead of aborting.
"""

from typing import Optional


class TreeLabError(Exception):
    """Base class for all errors raised by this package"""


class InvalidTreeError(TreeLabError, ValueError):
    """Tree parameters or node references are invalid"""


class InvalidParamsError(TreeLabError, ValueError):
    """Model, instance or compression parameters are invalid"""


class DatasetFormatError(TreeLabError, ValueError):
    """A dataset or ground-truth file does not follow the HTL1 format"""


class CorruptInputError(TreeLabError, ValueError):
    """Observed statistics are impossible under the model"""


class ReconstructionError(TreeLabError, RuntimeError):
    """A stage of the deep reconstruction failed for this trial"""

    def __init__(self, message: str, stage: str = "reconstruct", level: Optional[int] = None):
        super().__init__(message)
        self.stage = stage
        self.level = level
        # partial diagnostics, attached by reconstruct_tree
        self.diagnostics = None

    @property
    def reason(self) -> str:
        where = f" at level {self.level}" if self.level is not None else ""
        return f"{self.stage}{where}: {self}"


class AmbiguousRecoveryError(ReconstructionError):
    """Statistics were too close to call (ties below the configured margin)"""


class UnsupportedConfigurationError(ReconstructionError):
    """The inference procedure is not defined for this configuration"""
