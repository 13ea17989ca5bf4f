"""Domain exceptions shared by every layer."""

from typing import Optional


class WeakAlignError(Exception):
    """Base error. ``code`` is the machine-parsable tag printed by the CLI."""

    code: str = "weakalign_error"
    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ShapeError(WeakAlignError):
    code = "shape_error"


class NonFiniteError(WeakAlignError):
    code = "non_finite"


class InvalidInputError(WeakAlignError):
    code = "invalid_input"


class UnknownNameError(WeakAlignError):
    code = "unknown_name"


class ConfigError(WeakAlignError):
    code = "config_error"
    exit_code = 2


class DatasetFormatError(WeakAlignError):
    code = "dataset_format"
    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CheckpointError(WeakAlignError):
    code = "checkpoint_error"
    exit_code = 3


class PlacementError(WeakAlignError):
    code = "placement_failed"


class TemplateError(WeakAlignError):
    code = "template_unsatisfiable"


class TrainingDivergedError(WeakAlignError):
    code = "training_diverged"

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


class ExportError(WeakAlignError):
    code = "export_error"
