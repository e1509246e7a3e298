"""
Run directories: executing a training configuration and persisting its
record, checkpoints, loss tables and summary.
"""

import json
import os
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.table import Table

from ..config import TrainConfig
from ..exceptions import NonFiniteLossError, ReferenceFormatError
from ..utils import (
    TrainingLogger,
    file_sha256,
    format_duration,
    sanitize_filename,
    setup_logger,
    write_csv,
)
from .evaluation import (
    ReferenceSolution,
    accuracy_improvement,
    estimate_energy,
    midpoint_reference,
    relative_error,
)
from .network import ParamVector
from .problems import ProblemSpec, get_problem
from .trainer import RunRecord, Trainer

LOSS_COLUMNS = ("epoch", "bulk", "traction", "potential", "total")
SELECTION_COLUMNS = ("epoch", "sweep", "level", "losses")


def default_out_root() -> Path:
    """$HVI_OUT_DIR, falling back to ./runs."""
    env_dir = os.environ.get("HVI_OUT_DIR")
    return Path(env_dir) if env_dir else Path("runs")


class RunManager:
    """Executes training runs and manages their output directories."""

    def __init__(self, console: Optional[Console] = None, out_root: Optional[Path] = None):
        self.console = console or Console(stderr=True)
        self.out_root = out_root or default_out_root()

    def new_run_dir(self, cfg: TrainConfig, label: Optional[str] = None) -> Path:
        """Fresh directory under the output root named after the run."""
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        name = label or f"{cfg.problem}-{cfg.algorithm.value}"
        return self.out_root / sanitize_filename(f"{name}-s{cfg.seed}-{stamp}")

    def write_record(self, run_dir: Path, record: RunRecord) -> None:
        """Loss and selection tables of a (possibly partial) record."""
        write_csv(
            run_dir / "losses.csv",
            LOSS_COLUMNS,
            (
                (e.epoch, e.breakdown.bulk, e.breakdown.traction, e.breakdown.potential, e.breakdown.total)
                for e in record.epochs
            ),
        )
        write_csv(
            run_dir / "selections.csv",
            SELECTION_COLUMNS,
            (
                (s.epoch, s.sweep, s.level, ";".join(repr(v) for v in s.losses))
                for s in record.selections
            ),
        )

    def run(
        self,
        cfg: TrainConfig,
        run_dir: Optional[Path] = None,
        spec: Optional[ProblemSpec] = None,
        reference: Optional[ReferenceSolution] = None,
        preset: Optional[str] = None,
        expected_error: Optional[float] = None,
        show_progress: bool = True,
        energy_samples: int = 65536,
    ) -> Dict[str, Any]:
        """
        Train ``cfg`` into ``run_dir`` and return the run summary.

        A non-finite loss still writes the partial record and a failed summary
        before the error propagates.
        """
        spec = spec or get_problem(cfg.problem)
        run_dir = run_dir or self.new_run_dir(cfg, preset)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(cfg.model_dump_json(indent=2), encoding="utf-8")

        logger = setup_logger(log_file=run_dir / "train.log")
        trainer = Trainer(
            cfg,
            spec,
            checkpoint_dir=run_dir / "checkpoints",
            logger=TrainingLogger(logger, cfg.log_every),
            console=self.console,
            show_progress=show_progress,
        )

        summary: Dict[str, Any] = {
            "preset": preset,
            "run_dir": str(run_dir),
            "problem": spec.name,
            "algorithm": cfg.algorithm.value,
            "seed": cfg.seed,
            "config_hash": cfg.config_hash(),
            "planned_epochs": cfg.planned_epochs(),
            "expected_error": expected_error,
            "started_at": datetime.now().isoformat(),
        }

        try:
            theta, record = trainer.train()
        except NonFiniteLossError as e:
            record = e.record or trainer.record
            self.write_record(run_dir, record)
            summary.update(self._record_summary(record))
            summary["error"] = e.to_dict()
            self._write_summary(run_dir, summary)
            raise

        self.write_record(run_dir, record)
        summary.update(self._record_summary(record))
        if record.final_checkpoint:
            summary["final_checkpoint_sha256"] = file_sha256(Path(record.final_checkpoint))

        start = time.perf_counter()
        summary["final_energy"] = estimate_energy(
            theta, spec, n=energy_samples, seed=cfg.seed
        ).to_dict()
        if reference is None and spec.exact is not None:
            reference = midpoint_reference(spec)
        if reference is not None:
            report = relative_error(theta, spec, reference)
            summary["error_report"] = report.to_dict()
            summary["relative_error"] = report.relative_error
        summary["evaluation_time"] = time.perf_counter() - start

        self._write_summary(run_dir, summary)
        logger.info(
            f"Finished in {format_duration(record.wall_time)}; "
            f"final loss {record.final_loss}; summary at {run_dir / 'summary.json'}"
        )
        return summary

    def evaluate(
        self, theta: ParamVector, spec: ProblemSpec, reference: Optional[ReferenceSolution]
    ) -> Dict[str, Any]:
        """Error report of a trained field; manufactured problems default to their exact solution."""
        if reference is None:
            if spec.exact is None:
                raise ReferenceFormatError(
                    f"Problem '{spec.name}' needs a reference file for evaluation",
                    details={"problem": spec.name},
                )
            reference = midpoint_reference(spec)
        return relative_error(theta, spec, reference).to_dict()

    @staticmethod
    def _record_summary(record: RunRecord) -> Dict[str, Any]:
        return {
            "status": record.status,
            "steps": record.steps,
            "wall_time": record.wall_time,
            "final_loss": record.final_loss,
            "final_checkpoint": record.final_checkpoint,
            "checkpoints": record.checkpoints,
            "selections": [s.level for s in record.selections],
        }

    @staticmethod
    def _write_summary(run_dir: Path, summary: Dict[str, Any]) -> None:
        (run_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, default=str), encoding="utf-8"
        )

    @staticmethod
    def load_summary(path: Path) -> Dict[str, Any]:
        """Read summary.json from a file path or run directory."""
        if path.is_dir():
            path = path / "summary.json"
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def compare(self, paths: List[Path]) -> List[Dict[str, Any]]:
        """
        Relative errors of several runs and their improvement over the first.
        """
        rows = []
        baseline: Optional[float] = None
        for path in paths:
            summary = self.load_summary(path)
            err = summary.get("relative_error")
            row = {
                "run": str(path),
                "preset": summary.get("preset"),
                "algorithm": summary.get("algorithm"),
                "relative_error": err,
                "final_loss": summary.get("final_loss"),
                "improvement": None,
            }
            if err is not None:
                if baseline is None:
                    baseline = err
                else:
                    row["improvement"] = accuracy_improvement(baseline, err)
            rows.append(row)
        return rows

    def display_comparison(self, rows: List[Dict[str, Any]]) -> None:
        """Display compared runs in a table."""
        table = Table(title="Run Comparison")
        table.add_column("Run", style="cyan")
        table.add_column("Algorithm", style="white")
        table.add_column("Relative error", style="magenta", justify="right")
        table.add_column("Final loss", style="white", justify="right")
        table.add_column("Improvement", style="green", justify="right")
        for row in rows:
            err = row["relative_error"]
            loss = row["final_loss"]
            improvement = row["improvement"]
            table.add_row(
                row["preset"] or row["run"],
                row["algorithm"] or "",
                f"{err:.4f}" if err is not None else "-",
                f"{loss:.4e}" if loss is not None else "-",
                f"{improvement:.1%}" if improvement is not None else "-",
            )
        self.console.print(table)
