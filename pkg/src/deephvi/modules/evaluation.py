"""
Accuracy measures: energy norm, relative error against a reference solution,
and CSV export of trained fields.
"""

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from ..config import SampleSizes
from ..exceptions import ContractViolation, DomainMismatchError, ReferenceFormatError
from ..utils import write_csv
from .loss import EnergyBreakdown, contact_traces, energy_value, strain
from .network import ParamVector, evaluate_field
from .problems import ElasticityLaw, ProblemSpec, SegmentRole, apply_elasticity
from .sampling import make_rng, sample_uniform

Array = npt.NDArray[np.float64]

REFERENCE_COLUMNS = ("x", "y", "w", "u1", "u2", "du1dx", "du1dy", "du2dx", "du2dy")
EXPORT_COLUMNS = ("section", "x", "y", "u1", "u2", "u_nu", "u_tau")
WEIGHT_SUM_RTOL = 1e-8
EVALUATION_STREAM = 2


@dataclass(frozen=True)
class ReferenceSolution:
    """Quadrature nodes with weights, displacements and displacement gradients."""

    points: Array = field(repr=False)
    weights: Array = field(repr=False)
    values: Array = field(repr=False)
    gradients: Array = field(repr=False)  # [:, i, k] = du_i/dx_k
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.points.shape[0]
        expected = {
            "points": (n, 2),
            "weights": (n,),
            "values": (n, 2),
            "gradients": (n, 2, 2),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ReferenceFormatError(
                    f"Reference {name} has shape {getattr(self, name).shape}, expected {shape}"
                )
        if n == 0:
            raise ReferenceFormatError("Reference solution has no nodes")
        for name in expected:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ReferenceFormatError(f"Reference {name} contain non-finite entries")
        if np.any(self.weights <= 0):
            raise ReferenceFormatError("Reference weights must be positive")

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def load_csv(cls, path: Path) -> "ReferenceSolution":
        """
        Read ``x,y,w,u1,u2,du1dx,du1dy,du2dx,du2dy`` rows.

        Leading ``# key=value`` comment lines are kept as provenance metadata.
        """
        metadata: Dict[str, str] = {}
        rows: List[List[float]] = []
        try:
            with open(path, newline="") as f:
                lines = [line for line in f if line.strip()]
        except OSError as e:
            raise ReferenceFormatError(f"Cannot read reference file {path}: {e}") from e

        body = []
        for line in lines:
            if line.startswith("#"):
                for item in line[1:].split():
                    if "=" in item:
                        key, value = item.split("=", 1)
                        metadata[key] = value
            else:
                body.append(line)
        reader = csv.reader(body)
        header = [h.strip() for h in next(reader, [])]
        if tuple(header) != REFERENCE_COLUMNS:
            raise ReferenceFormatError(
                f"Reference header must be {','.join(REFERENCE_COLUMNS)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(REFERENCE_COLUMNS):
                raise ReferenceFormatError(f"{path}:{lineno}: expected 9 columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as e:
                raise ReferenceFormatError(f"{path}:{lineno}: {e}") from e
        if not rows:
            raise ReferenceFormatError(f"{path}: no reference nodes")

        data = np.asarray(rows, dtype=np.float64)
        return cls(
            points=data[:, 0:2],
            weights=data[:, 2],
            values=data[:, 3:5],
            gradients=data[:, 5:9].reshape(-1, 2, 2),
            metadata=metadata,
        )

    def save_csv(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            for key, value in self.metadata.items():
                f.write(f"# {key}={value}\n")
            writer = csv.writer(f)
            writer.writerow(REFERENCE_COLUMNS)
            grads = self.gradients.reshape(-1, 4)
            for p, w, v, g in zip(self.points, self.weights, self.values, grads):
                writer.writerow([repr(float(x)) for x in (*p, w, *v, *g)])
        return path

    def check_domain(self, spec: ProblemSpec) -> None:
        """Nodes must lie in the closed body and weights must integrate its area."""
        inside = spec.domain.contains(self.points)
        if not np.all(inside):
            outside = int(np.count_nonzero(~inside))
            raise DomainMismatchError(
                f"{outside} reference nodes lie outside the domain of '{spec.name}'",
                details={"outside": outside, "first": self.points[~inside][0].tolist()},
            )
        total = float(self.weights.sum())
        if abs(total - spec.area) > WEIGHT_SUM_RTOL * spec.area:
            raise DomainMismatchError(
                f"Reference weights sum to {total}, domain area is {spec.area}",
                details={"weight_sum": total, "area": spec.area},
            )


@dataclass(frozen=True)
class ErrorReport:
    energy_norm_ref: float
    energy_norm_diff: float
    relative_error: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def energy_norm(law: ElasticityLaw, gradients: Array, weights: Array) -> float:
    """(1/sqrt 2) (sum_k w_k sigma(eps):eps at node k)^(1/2)."""
    g = np.asarray(gradients, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ContractViolation("Energy norm needs at least one quadrature node")
    eps = strain([[g[:, i, k] for k in range(2)] for i in range(2)])
    density = apply_elasticity(law, eps).contract(eps)
    return float(np.sqrt(max(float(np.sum(w * density)), 0.0) / 2.0))


def relative_error(theta: ParamVector, spec: ProblemSpec, ref: ReferenceSolution) -> ErrorReport:
    """Energy-norm error of the masked network relative to ``ref``."""
    ref.check_domain(spec)
    _, grads = evaluate_field(theta, spec.mask, ref.points)
    ref_norm = energy_norm(spec.law, ref.gradients, ref.weights)
    if ref_norm == 0.0:
        raise ContractViolation("Reference solution has zero energy norm")
    diff_norm = energy_norm(spec.law, grads - ref.gradients, ref.weights)
    return ErrorReport(ref_norm, diff_norm, diff_norm / ref_norm)


def midpoint_nodes(spec: ProblemSpec, n: int) -> Tuple[Array, Array]:
    """Cell midpoints of an n x n grid and their equal weights."""
    if n < 1:
        raise ContractViolation(f"Midpoint rule needs n >= 1, got {n}")
    d = spec.domain
    xs = d.x0 + (np.arange(n) + 0.5) * (d.x1 - d.x0) / n
    ys = d.y0 + (np.arange(n) + 0.5) * (d.y1 - d.y0) / n
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    return points, np.full(points.shape[0], spec.area / points.shape[0])


def midpoint_reference(spec: ProblemSpec, n: int = 128) -> ReferenceSolution:
    """Reference from the closed-form solution of a manufactured problem."""
    if spec.exact is None:
        raise ContractViolation(
            f"Problem '{spec.name}' has no closed-form solution; pass a reference file"
        )
    points, weights = midpoint_nodes(spec, n)
    return ReferenceSolution(
        points,
        weights,
        spec.exact.value(points),
        spec.exact.jacobian(points),
        {"method": "exact-midpoint", "n": str(n)},
    )


def network_reference(theta: ParamVector, spec: ProblemSpec, n: int = 64) -> ReferenceSolution:
    """Reference sampled from a network field on a midpoint grid."""
    points, weights = midpoint_nodes(spec, n)
    values, grads = evaluate_field(theta, spec.mask, points)
    return ReferenceSolution(points, weights, values, grads, {"method": "network", "n": str(n)})


@dataclass(frozen=True)
class ExportRow:
    section: str
    x: float
    y: float
    u1: float
    u2: float
    u_nu: Optional[float] = None
    u_tau: Optional[float] = None

    def as_tuple(self) -> Tuple[Any, ...]:
        return (self.section, self.x, self.y, self.u1, self.u2, self.u_nu, self.u_tau)


def export_field(theta: ParamVector, spec: ProblemSpec, resolution: int) -> List[ExportRow]:
    """
    Field on a uniform resolution x resolution grid over the closed body,
    followed by ``resolution`` points along each contact segment with the
    normal and tangential traces.
    """
    if resolution < 2:
        raise ContractViolation(f"Export resolution must be at least 2, got {resolution}")
    d = spec.domain
    xs = np.linspace(d.x0, d.x1, resolution)
    ys = np.linspace(d.y0, d.y1, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    values, _ = evaluate_field(theta, spec.mask, points)
    rows = [
        ExportRow("domain", float(p[0]), float(p[1]), float(v[0]), float(v[1]))
        for p, v in zip(points, values)
    ]

    for segment in spec.segments_with(SegmentRole.CONTACT):
        pts = segment.point_at(np.linspace(0.0, 1.0, resolution))
        vals, _ = evaluate_field(theta, spec.mask, pts)
        u_nu, u_tau = contact_traces((vals[:, 0], vals[:, 1]), segment.normal)
        tangent = segment.direction
        u_tau_along = u_tau[0] * tangent[0] + u_tau[1] * tangent[1]
        rows.extend(
            ExportRow(
                "contact", float(p[0]), float(p[1]), float(v[0]), float(v[1]),
                float(n), float(t),
            )
            for p, v, n, t in zip(pts, vals, np.atleast_1d(u_nu), np.atleast_1d(u_tau_along))
        )
    return rows


def write_export(path: Path, rows: Sequence[ExportRow]) -> Path:
    return write_csv(path, EXPORT_COLUMNS, (row.as_tuple() for row in rows))


def estimate_energy(
    theta: ParamVector,
    spec: ProblemSpec,
    n: int = 65536,
    seed: int = 0,
    chunks: int = 16,
) -> EnergyBreakdown:
    """Energy on one large fresh uniform batch, evaluated in chunks."""
    boundary = max(1, n // 4)
    sizes = SampleSizes(domain=n, traction=boundary, contact=boundary)
    batch = sample_uniform(spec, sizes, make_rng(seed, EVALUATION_STREAM))
    return energy_value(theta, spec, batch, chunks)


def accuracy_improvement(baseline: float, candidate: float) -> float:
    """Relative error reduction (baseline - candidate) / baseline."""
    if not baseline > 0.0:
        raise ContractViolation(f"Baseline error must be positive, got {baseline}")
    return (baseline - candidate) / baseline
