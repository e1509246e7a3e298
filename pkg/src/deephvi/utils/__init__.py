"""
Utility functions initialization.
"""

from .file_utils import (
    CHECKPOINT_MAGIC,
    CHECKPOINT_SUFFIX,
    file_sha256,
    format_duration,
    load_checkpoint,
    save_checkpoint,
    write_csv,
)
from .logger import TrainingLogger, get_logger, setup_logger
from .validators import (
    sanitize_filename,
    validate_epochs_scale,
    validate_output_dir,
    validate_preset_name,
    validate_resolution,
    validate_seed,
    validate_workers,
)

__all__ = [
    # File utilities
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_SUFFIX",
    "file_sha256",
    "format_duration",
    "load_checkpoint",
    "save_checkpoint",
    "write_csv",

    # Logging utilities
    "TrainingLogger",
    "get_logger",
    "setup_logger",

    # Validation utilities
    "sanitize_filename",
    "validate_epochs_scale",
    "validate_output_dir",
    "validate_preset_name",
    "validate_resolution",
    "validate_seed",
    "validate_workers",
]
