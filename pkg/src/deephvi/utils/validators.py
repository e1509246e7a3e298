"""
Utility functions for validating command-line arguments.
"""

import os
import re
from pathlib import Path
from typing import Optional

MAX_SEED = 2**64 - 1


def validate_seed(seed: int) -> bool:
    """
    Validate a run seed (unsigned 64-bit).

    Args:
        seed: Seed to validate

    Returns:
        True if valid, False otherwise
    """
    return 0 <= seed <= MAX_SEED


def validate_epochs_scale(scale: float) -> bool:
    """Epoch scale factors must be positive and at most 1."""
    return 0.0 < scale <= 1.0


def validate_resolution(resolution: int) -> bool:
    """Export grids need at least two points per axis."""
    return resolution >= 2


def validate_workers(workers: int) -> bool:
    """
    Validate the number of gradient shards.

    Args:
        workers: Number of shards to validate

    Returns:
        True if valid, False otherwise
    """
    max_cores = os.cpu_count() or 1
    return 1 <= workers <= max_cores


def validate_preset_name(name: str) -> tuple[bool, Optional[str]]:
    """
    Validate preset name format.

    Args:
        name: Preset name to validate

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not name:
        return False, "Preset name cannot be empty"

    if len(name) > 50:
        return False, "Preset name must be 50 characters or less"

    if not re.match(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$", name):
        return False, "Preset name may only contain letters, digits, '-', '_' and '.'"

    return True, None


def sanitize_filename(filename: str) -> str:
    """
    Sanitize filename by removing invalid characters.

    Args:
        filename: Original filename

    Returns:
        Sanitized filename
    """
    invalid_chars = r'[<>:"/\\|?*\s]'
    sanitized = re.sub(invalid_chars, "_", filename)

    # Remove leading/trailing dots
    sanitized = sanitized.strip(" .")

    if not sanitized:
        sanitized = "run"

    return sanitized


def validate_output_dir(path: Path) -> tuple[bool, Optional[str]]:
    """
    Check that a run output directory can be created and written.

    Args:
        path: Directory to validate

    Returns:
        Tuple of (is_valid, error_message)
    """
    existing = path
    while not existing.exists():
        if existing.parent == existing:
            return False, f"No existing ancestor for {path}"
        existing = existing.parent
    if not existing.is_dir():
        return False, f"Not a directory: {existing}"
    if not os.access(existing, os.W_OK):
        return False, f"No write permission in directory: {existing}"
    return True, None
