"""
Utility functions for file operations: checkpoints, CSV tables, directories.
"""

import csv
import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Tuple

import numpy as np

from ..config import NetworkArch
from ..exceptions import CheckpointFormatError

CHECKPOINT_MAGIC = b"HVICKPT1"
CHECKPOINT_SUFFIX = ".hvi"
_HEADER_LEN = struct.Struct("<Q")


def save_checkpoint(
    path: Path, arch: NetworkArch, values: np.ndarray, metadata: Dict[str, Any] = None
) -> Path:
    """
    Write parameters as magic + header length + JSON header + little-endian f8.

    Args:
        path: Destination file
        arch: Architecture stored in the header
        values: Flat parameter array
        metadata: Extra JSON-serializable header fields (epoch, seed, problem)

    Returns:
        The written path
    """
    header = {
        "arch": arch.model_dump(mode="json"),
        "count": int(values.size),
        "metadata": metadata or {},
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_HEADER_LEN.pack(len(encoded)))
        f.write(encoded)
        f.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    return path


def load_checkpoint(path: Path) -> Tuple[NetworkArch, np.ndarray, Dict[str, Any]]:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointFormatError: bad magic, truncated data or inconsistent header
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointFormatError(f"Cannot read checkpoint {path}: {e}") from e

    prefix = len(CHECKPOINT_MAGIC) + _HEADER_LEN.size
    if len(data) < prefix or data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path} is not a deephvi checkpoint")
    (header_len,) = _HEADER_LEN.unpack_from(data, len(CHECKPOINT_MAGIC))
    if prefix + header_len > len(data):
        raise CheckpointFormatError(f"{path}: header length {header_len} exceeds file size")

    try:
        header = json.loads(data[prefix : prefix + header_len].decode("utf-8"))
        arch = NetworkArch.model_validate(header["arch"])
        count = int(header["count"])
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointFormatError(f"{path}: malformed header ({e})") from e

    payload = data[prefix + header_len :]
    if len(payload) != 8 * count:
        raise CheckpointFormatError(
            f"{path}: expected {count} parameters, found {len(payload) / 8:g}",
            details={"expected": count, "bytes": len(payload)},
        )
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return arch, values, header.get("metadata", {})


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows under a header, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return path


def file_sha256(path: Path) -> str:
    """Hex SHA-256 of a file's contents."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def format_duration(seconds: float) -> str:
    """
    Format a duration in human readable form.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted string like "2h 03m 05s"
    """
    seconds = int(round(seconds))
    hours, rest = divmod(seconds, 3600)
    minutes, secs = divmod(rest, 60)
    if hours:
        return f"{hours}h {minutes:02d}m {secs:02d}s"
    if minutes:
        return f"{minutes}m {secs:02d}s"
    return f"{secs}s"
