"""
Exception hierarchy for the pipeline
"""
from typing import Optional


class MicroSegNetError(Exception):
    """Base class for all pipeline errors"""


class ConfigError(MicroSegNetError, ValueError):
    """Invalid or unreadable configuration"""


class ShapeMismatchError(MicroSegNetError, ValueError):
    """Arrays that must agree spatially do not"""


class InvalidWeightsError(MicroSegNetError, ValueError):
    """Hard/easy weights violate w_hard >= w_easy >= 1"""


class GenerationError(MicroSegNetError):
    """Synthetic case could not be generated"""


class DatasetError(MicroSegNetError):
    """On-disk dataset is missing files, inconsistent or corrupt"""

    def __init__(self, message: str, case_id: Optional[str] = None):
        self.case_id = case_id
        if case_id is not None:
            message = f"[{case_id}] {message}"
        super().__init__(message)


class EmptyBoundaryError(MicroSegNetError, ValueError):
    """Surface distance requested for a mask without foreground"""


class TrainingDivergedError(MicroSegNetError):
    """Loss became NaN or infinite"""


class DataLeakageError(MicroSegNetError):
    """A case appears in both the training and the test split"""


class CheckpointError(MicroSegNetError):
    """Checkpoint unreadable or incompatible with the requested configuration"""
