"""
Logging configuration and utilities.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.logging import RichHandler

LOGGER_NAME = "deephvi"
FILE_HANDLER_NAME = "deephvi-run-file"


def setup_logger(
    name: str = LOGGER_NAME,
    level: Optional[str] = None,
    log_file: Optional[Path] = None,
    console: Optional[Console] = None
) -> logging.Logger:
    """
    Set up logger with Rich formatting.

    Args:
        name: Logger name
        level: Logging level; when omitted an already configured level is kept,
            otherwise $HVI_LOG_LEVEL or INFO is used
        log_file: Optional log file path; replaces a previous run's file
        console: Optional Rich console instance

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    if level is not None:
        logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    elif logger.level == logging.NOTSET:
        level = os.environ.get("HVI_LOG_LEVEL", "INFO")
        logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    # Avoid duplicate console handlers
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        if console is None:
            console = Console(stderr=True)

        rich_handler = RichHandler(
            console=console,
            show_time=True,
            show_path=False,
            rich_tracebacks=True,
            markup=True
        )
        rich_handler.setFormatter(
            logging.Formatter(
                "%(message)s",
                datefmt="[%X]"
            )
        )
        logger.addHandler(rich_handler)

    if log_file:
        for handler in [h for h in logger.handlers if h.get_name() == FILE_HANDLER_NAME]:
            logger.removeHandler(handler)
            handler.close()
        try:
            log_file.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(log_file)
            file_handler.set_name(FILE_HANDLER_NAME)
            file_handler.setFormatter(
                logging.Formatter(
                    "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
                    datefmt="%Y-%m-%d %H:%M:%S"
                )
            )
            logger.addHandler(file_handler)
        except (OSError, PermissionError) as e:
            logger.warning(f"Could not create log file {log_file}: {e}")

    return logger


def get_logger() -> logging.Logger:
    """Package logger; handlers are attached by setup_logger."""
    return logging.getLogger(LOGGER_NAME)


class TrainingLogger:
    """Logger for tracking training phases, losses and selections."""

    def __init__(self, logger: Optional[logging.Logger] = None, log_every: int = 100):
        self.logger = logger or get_logger()
        self.log_every = log_every
        self.phases: List[Dict[str, Any]] = []
        self.selections = 0
        self.checkpoints = 0
        self.last_total: Optional[float] = None

    def log_run_start(self, problem: str, algorithm: str, epochs: int, seed: int):
        """Log start of a training run."""
        self.logger.info(
            f"Training {problem} with {algorithm} "
            f"({epochs} epochs, seed {seed})"
        )

    def log_phase_start(self, phase: str, epochs: int):
        """Log start of a training phase."""
        self.phases.append({"phase": phase, "epochs": epochs})
        self.logger.info(f"Phase {phase}: {epochs} epochs")

    def log_epoch(self, epoch: int, breakdown: Any):
        """Log a periodic loss summary."""
        self.last_total = breakdown.total
        if epoch % self.log_every == 0:
            self.logger.debug(
                f"epoch {epoch}: total={breakdown.total:.6e} bulk={breakdown.bulk:.6e} "
                f"traction={breakdown.traction:.6e} potential={breakdown.potential:.6e}"
            )

    def log_selection(self, epoch: int, level: int, losses: List[float]):
        """Log the block or level chosen for a refinement sweep."""
        self.selections += 1
        formatted = ", ".join(f"{v:.4e}" for v in losses)
        self.logger.info(f"epoch {epoch}: selected level {level} from [{formatted}]")

    def log_checkpoint(self, epoch: int, path: Path):
        self.checkpoints += 1
        self.logger.debug(f"Checkpoint at epoch {epoch}: {path}")

    def log_failure(self, epoch: int, error: str):
        """Log training abort."""
        self.logger.error(f"❌ Training aborted at epoch {epoch}: {error}")

    def get_summary(self) -> dict:
        """Get training summary."""
        return {
            "phases": self.phases,
            "selections": self.selections,
            "checkpoints": self.checkpoints,
            "last_total": self.last_total,
        }
