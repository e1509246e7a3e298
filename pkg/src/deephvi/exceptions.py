"""
Error hierarchy for deephvi.

Library code raises these; the CLI turns them into a red console message plus a
machine-readable JSON error object and a nonzero exit code.
"""

from typing import Any, Dict, Optional


class HVIError(Exception):
    """Base class for every error raised by deephvi."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form used by the CLI."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class ContractViolation(HVIError, ValueError):
    """A documented precondition of an operation does not hold."""


class LayoutError(HVIError, ValueError):
    """Parameter vector does not match the architecture layout."""


class SingularLawError(HVIError, ValueError):
    """Elasticity law is singular for the given Poisson ratio."""


class EmptyGridError(HVIError, ValueError):
    """A lattice level contains no points in one of the sampled regions."""


class NonFiniteLossError(HVIError, ArithmeticError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, epoch: int, breakdown: Any, record: Any = None):
        super().__init__(
            f"Non-finite loss at epoch {epoch}: {breakdown}",
            details={
                "epoch": epoch,
                "breakdown": breakdown.to_dict() if hasattr(breakdown, "to_dict") else str(breakdown),
            },
        )
        self.epoch = epoch
        self.breakdown = breakdown
        self.record = record


class UnknownPresetError(HVIError, KeyError):
    """Requested preset does not exist."""

    def __init__(self, name: str, available: list[str]):
        super().__init__(
            f"Unknown preset '{name}'. Available presets: {', '.join(available)}",
            details={"preset": name, "available": available},
        )

    def __str__(self) -> str:
        return self.message


class DomainMismatchError(HVIError, ValueError):
    """Evaluation nodes lie outside the problem domain."""


class ReferenceFormatError(HVIError, ValueError):
    """Reference solution file is malformed."""


class CheckpointFormatError(HVIError, ValueError):
    """Checkpoint file is malformed."""
