# ============================================================================
# shared/errors.py - Exception hierarchy
# ============================================================================
from typing import Optional


class PlanGenError(Exception):
    """Base class for every error raised by the package"""


class ShapeError(PlanGenError):
    """Array extents do not line up for an operation"""


class NumericError(PlanGenError):
    """Non-finite values or degenerate numeric input"""


class GradientCheckError(PlanGenError):
    """Gradient check could not be run or did not pass"""


class VocabularyError(PlanGenError):
    pass


class PlanError(PlanGenError):
    pass


class CorpusFormatError(PlanGenError):
    """Malformed corpus record"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class ConfigError(PlanGenError):
    """Invalid run configuration"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class CheckpointError(PlanGenError):
    """Checkpoint cannot be saved or does not match the expected model"""

    def __init__(self, message: str, parameter: Optional[str] = None):
        self.parameter = parameter
        super().__init__(f"{parameter}: {message}" if parameter else message)
