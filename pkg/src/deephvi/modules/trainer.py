"""
Training algorithms: basic, blockwise, and adaptive mesh-free multigrid.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskID,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)

from ..config import Algorithm, TrainConfig
from ..exceptions import ContractViolation, NonFiniteLossError
from ..utils import CHECKPOINT_SUFFIX, TrainingLogger, save_checkpoint
from .autodiff import GradVector
from .loss import EnergyBreakdown, energy_and_gradient, energy_value
from .network import INPUT_BLOCK, ParamVector, init_params
from .optimizer import AdamState, IndexSet, adam_step
from .problems import ProblemSpec, get_problem
from .sampling import (
    GridLevel,
    SampleBatch,
    build_grids,
    make_rng,
    sample_from_grid,
    sample_uniform,
)

GradientFn = Callable[[ParamVector, ProblemSpec, SampleBatch], Tuple[EnergyBreakdown, GradVector]]
EnergyFn = Callable[[ParamVector, ProblemSpec, SampleBatch], EnergyBreakdown]

SAMPLING_STREAM = 1


@dataclass
class EpochRecord:
    """Loss of one optimizer step."""

    epoch: int
    phase: str
    breakdown: EnergyBreakdown
    block: Optional[int] = None

    def to_dict(self) -> Dict:
        return {
            "epoch": self.epoch,
            "phase": self.phase,
            "block": self.block,
            **self.breakdown.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EpochRecord":
        return cls(
            epoch=data["epoch"],
            phase=data["phase"],
            block=data.get("block"),
            breakdown=EnergyBreakdown(
                data["bulk"], data["traction"], data["potential"], data["total"]
            ),
        )


@dataclass
class Selection:
    """Block or level chosen at the start of a refinement sweep."""

    epoch: int
    sweep: int
    level: int
    losses: List[float] = field(default_factory=list)


@dataclass
class RunRecord:
    """Everything a training run produced apart from the parameters."""

    problem: str
    algorithm: str
    seed: int
    config_hash: str = ""
    epochs: List[EpochRecord] = field(default_factory=list)
    selections: List[Selection] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)
    final_checkpoint: Optional[str] = None
    wall_time: float = 0.0
    status: str = "running"
    error: Optional[str] = None

    @property
    def steps(self) -> int:
        return len(self.epochs)

    @property
    def final_loss(self) -> Optional[float]:
        return self.epochs[-1].breakdown.total if self.epochs else None

    def to_dict(self) -> Dict:
        """Convert record to dictionary for serialization."""
        return {
            "problem": self.problem,
            "algorithm": self.algorithm,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "epochs": [e.to_dict() for e in self.epochs],
            "selections": [
                {"epoch": s.epoch, "sweep": s.sweep, "level": s.level, "losses": s.losses}
                for s in self.selections
            ],
            "checkpoints": self.checkpoints,
            "final_checkpoint": self.final_checkpoint,
            "wall_time": self.wall_time,
            "status": self.status,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "RunRecord":
        """Create record from dictionary."""
        return cls(
            problem=data["problem"],
            algorithm=data["algorithm"],
            seed=data["seed"],
            config_hash=data.get("config_hash", ""),
            epochs=[EpochRecord.from_dict(e) for e in data.get("epochs", [])],
            selections=[Selection(**s) for s in data.get("selections", [])],
            checkpoints=list(data.get("checkpoints", [])),
            final_checkpoint=data.get("final_checkpoint"),
            wall_time=data.get("wall_time", 0.0),
            status=data.get("status", "completed"),
            error=data.get("error"),
        )


def select_level(losses: Sequence[float]) -> int:
    """1-based argmin; ties go to the lowest level."""
    if len(losses) == 0:
        raise ContractViolation("select_level needs at least one level")
    values = np.asarray(losses, dtype=np.float64)
    if np.any(np.isnan(values)):
        raise ContractViolation(
            "Level losses contain NaN", details={"losses": [float(v) for v in values]}
        )
    return int(np.argmin(values)) + 1


class Trainer:
    """
    Runs one training configuration on one problem.

    The gradient and level-energy callables are injectable so algorithm
    bookkeeping can be exercised with stub losses.
    """

    def __init__(
        self,
        cfg: TrainConfig,
        spec: Optional[ProblemSpec] = None,
        checkpoint_dir: Optional[Path] = None,
        logger: Optional[TrainingLogger] = None,
        console: Optional[Console] = None,
        show_progress: bool = False,
        gradient_fn: Optional[GradientFn] = None,
        level_energy_fn: Optional[EnergyFn] = None,
    ):
        self.cfg = cfg
        self.spec = spec or get_problem(cfg.problem)
        self.checkpoint_dir = checkpoint_dir
        self.logger = logger or TrainingLogger(log_every=cfg.log_every)
        self.console = console or Console(stderr=True)
        self.show_progress = show_progress
        self.gradient_fn = gradient_fn or (
            lambda theta, spec, batch: energy_and_gradient(theta, spec, batch, cfg.workers)
        )
        self.level_energy_fn = level_energy_fn or (
            lambda theta, spec, batch: energy_value(theta, spec, batch, cfg.workers)
        )

        self.rng = make_rng(cfg.seed, SAMPLING_STREAM)
        self.theta = init_params(cfg.arch, cfg.seed)
        self.state = AdamState.zeros(self.theta.values.size, cfg.adam)
        self.record = RunRecord(
            problem=self.spec.name,
            algorithm=cfg.algorithm.value,
            seed=cfg.seed,
            config_hash=cfg.config_hash(),
        )
        self.steps = 0
        self._progress: Optional[Progress] = None
        self._task: Optional[TaskID] = None

    # Entry points

    def train(self) -> Tuple[ParamVector, RunRecord]:
        """Dispatch on the configured algorithm."""
        runners = {
            Algorithm.BASIC: self.train_basic,
            Algorithm.BLOCKWISE: self.train_blockwise,
            Algorithm.MULTIGRID: self.train_adaptive_multigrid,
        }
        return runners[self.cfg.algorithm]()

    def train_basic(self) -> Tuple[ParamVector, RunRecord]:
        """Fresh uniform batch and a full-parameter step per epoch."""
        return self._run(lambda: self._initial_phase(self.cfg.epochs))

    def train_blockwise(self) -> Tuple[ParamVector, RunRecord]:
        """Full-parameter initialization, then sweeps over the parallel blocks."""
        self._require_blocks()

        def body() -> None:
            self._initial_phase(self.cfg.epoch_int)
            remaining = self.cfg.refinement_epochs()
            self.logger.log_phase_start("refinement", remaining)
            self._checkpoint("refinement-start")
            sweep = 0
            while remaining > 0:
                sweep += 1
                for p in range(1, self.cfg.levels + 1):
                    if remaining == 0:
                        break
                    self.record.selections.append(Selection(self.steps, sweep, p))
                    active = self._active(p)
                    for _ in range(min(self.cfg.epoch_b, remaining)):
                        batch = sample_uniform(self.spec, self.cfg.sizes, self.rng)
                        self._step(batch, "refinement", active, p)
                        remaining -= 1
                if self.cfg.epoch_b == 0:
                    break

        return self._run(body)

    def train_adaptive_multigrid(self) -> Tuple[ParamVector, RunRecord]:
        """
        Full-parameter initialization, then per sweep: evaluate the energy on
        one lattice batch per level, pick the cheapest level, and train that
        level's block on batches drawn from its lattice.
        """
        self._require_blocks()
        grids = build_grids(self.spec, self.cfg.grid_step, self.cfg.levels)

        def body() -> None:
            self._initial_phase(self.cfg.epoch_int)
            self.logger.log_phase_start("refinement", self.cfg.refinement_epochs())
            self._checkpoint("refinement-start")
            for sweep in range(1, self.cfg.epoch_re + 1):
                p = self._choose_level(grids, sweep)
                active = self._active(p)
                for _ in range(self.cfg.epoch_b):
                    batch = sample_from_grid(grids[p - 1], self.cfg.sizes, self.rng)
                    self._step(batch, "refinement", active, p)

        return self._run(body)

    # Internals

    def _require_blocks(self) -> None:
        if not self.cfg.arch.is_block:
            raise ContractViolation(
                f"{self.cfg.algorithm.value} training needs a block_resnet architecture"
            )

    def _active(self, block: int) -> IndexSet:
        return self.theta.layout.block_indices(INPUT_BLOCK, block)

    def _choose_level(self, grids: List[GridLevel], sweep: int) -> int:
        losses = []
        for grid in grids:
            batch = sample_from_grid(grid, self.cfg.sizes, self.rng)
            losses.append(self.level_energy_fn(self.theta, self.spec, batch).total)
        level = select_level(losses)
        self.record.selections.append(Selection(self.steps, sweep, level, losses))
        self.logger.log_selection(self.steps, level, losses)
        return level

    def _initial_phase(self, epochs: int) -> None:
        self.logger.log_phase_start("initialization", epochs)
        for _ in range(epochs):
            batch = sample_uniform(self.spec, self.cfg.sizes, self.rng)
            self._step(batch, "initialization", None, None)

    def _step(
        self,
        batch: SampleBatch,
        phase: str,
        active: Optional[IndexSet],
        block: Optional[int],
    ) -> None:
        breakdown, grad = self.gradient_fn(self.theta, self.spec, batch)
        epoch = self.steps + 1
        if not breakdown.is_finite() or not np.all(np.isfinite(grad)):
            self.record.status = "failed"
            self.record.error = f"non-finite loss at epoch {epoch}"
            self.logger.log_failure(epoch, self.record.error)
            raise NonFiniteLossError(epoch, breakdown, self.record)

        self.state, self.theta = adam_step(self.state, self.theta, grad, active)
        self.steps = epoch
        self.record.epochs.append(EpochRecord(epoch, phase, breakdown, block))
        self.logger.log_epoch(epoch, breakdown)
        if self._progress is not None and self._task is not None:
            self._progress.update(self._task, advance=1, description=f"{phase} {breakdown.total:.4e}")
        if epoch % self.cfg.checkpoint_every == 0:
            self._checkpoint(phase)

    def _checkpoint(self, phase: str) -> Optional[Path]:
        if self.checkpoint_dir is None:
            return None
        path = self.checkpoint_dir / f"ckpt_{self.steps:06d}{CHECKPOINT_SUFFIX}"
        if str(path) in self.record.checkpoints:
            return path
        save_checkpoint(
            path,
            self.cfg.arch,
            self.theta.values,
            {"epoch": self.steps, "seed": self.cfg.seed, "problem": self.spec.name, "phase": phase},
        )
        self.record.checkpoints.append(str(path))
        self.logger.log_checkpoint(self.steps, path)
        return path

    def _run(self, body: Callable[[], None]) -> Tuple[ParamVector, RunRecord]:
        planned = self.cfg.planned_epochs()
        self.logger.log_run_start(self.spec.name, self.cfg.algorithm.value, planned, self.cfg.seed)
        start = time.perf_counter()
        try:
            if self.show_progress:
                with Progress(
                    SpinnerColumn(),
                    TextColumn("[progress.description]{task.description}"),
                    BarColumn(),
                    TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
                    TimeElapsedColumn(),
                    TimeRemainingColumn(),
                    console=self.console,
                ) as progress:
                    self._progress = progress
                    self._task = progress.add_task("training", total=max(planned, 1))
                    body()
            else:
                body()
        finally:
            self._progress = None
            self._task = None
            self.record.wall_time = time.perf_counter() - start

        self._checkpoint("final")
        self.record.status = "completed"
        if self.checkpoint_dir is not None:
            final = self.checkpoint_dir.parent / f"final{CHECKPOINT_SUFFIX}"
            save_checkpoint(
                final,
                self.cfg.arch,
                self.theta.values,
                {"epoch": self.steps, "seed": self.cfg.seed, "problem": self.spec.name, "phase": "final"},
            )
            self.record.final_checkpoint = str(final)
        return self.theta, self.record


def train(cfg: TrainConfig, spec: Optional[ProblemSpec] = None, **kwargs) -> Tuple[ParamVector, RunRecord]:
    """Convenience wrapper around :class:`Trainer`."""
    return Trainer(cfg, spec, **kwargs).train()


def smoothed(values: Sequence[float], window: int) -> np.ndarray:
    """Trailing moving average used for loss-trend checks."""
    if window < 1:
        raise ContractViolation(f"Window must be positive, got {window}")
    v = np.asarray(values, dtype=np.float64)
    if v.size < window:
        return v.copy()
    kernel = np.ones(window) / window
    return np.convolve(v, kernel, mode="valid")


__all__ = [
    "EpochRecord",
    "RunRecord",
    "Selection",
    "Trainer",
    "select_level",
    "smoothed",
    "train",
]
