"""
Monte Carlo batches over the body and its loaded boundaries, uniform or
restricted to the lattices of the multigrid levels.
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from ..config import SampleSizes
from ..exceptions import ContractViolation, EmptyGridError
from .problems import ProblemSpec, Segment, SegmentRole

Array = npt.NDArray[np.float64]

LATTICE_TOL = 1e-12


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """
    Counter-based generator for one of a run's random streams.

    Stream 0 initializes parameters; stream ``k`` jumps the Philox counter
    ``k`` times so streams never overlap.
    """
    bit_generator = np.random.Philox(seed)
    if stream:
        bit_generator = bit_generator.jumped(stream)
    return np.random.Generator(bit_generator)


@dataclass(frozen=True)
class SampleBatch:
    """
    Points for one stochastic energy evaluation.

    ``counts`` holds the normalisers (N, N_T, N_C) of the full batch, so a shard
    of a batch still yields its additive share of the energy.
    """

    domain: Array
    traction: Tuple[Tuple[str, Array], ...]
    contact: Array
    measures: Tuple[float, float, float]
    counts: Tuple[int, int, int]

    @property
    def traction_points(self) -> Array:
        if not self.traction:
            return np.zeros((0, 2))
        return np.concatenate([pts for _, pts in self.traction])

    @property
    def sizes(self) -> Tuple[int, int, int]:
        """Number of points actually held, per region."""
        return (
            self.domain.shape[0],
            sum(pts.shape[0] for _, pts in self.traction),
            self.contact.shape[0],
        )


def allocate(total: int, weights: Sequence[float]) -> List[int]:
    """Split ``total`` proportionally to ``weights`` by largest remainder."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        return []
    if np.any(w < 0) or w.sum() <= 0:
        raise ContractViolation(f"Cannot allocate over weights {list(weights)}")
    quotas = total * w / w.sum()
    counts = np.floor(quotas).astype(int)
    remainder = total - int(counts.sum())
    # stable sort keeps the lowest index first among equal remainders
    order = np.argsort(-(quotas - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts.tolist()


def _draw_on_segments(
    segments: Sequence[Segment], total: int, rng: np.random.Generator
) -> Tuple[Tuple[str, Array], ...]:
    counts = allocate(total, [s.length for s in segments])
    return tuple(
        (s.name, s.point_at(rng.random(k))) for s, k in zip(segments, counts)
    )


def _measures(spec: ProblemSpec) -> Tuple[float, float, float]:
    return spec.area, spec.traction_length, spec.contact_length


def sample_uniform(
    spec: ProblemSpec, sizes: SampleSizes, rng: np.random.Generator
) -> SampleBatch:
    """i.i.d. uniform points in the body, on the traction and on the contact boundary."""
    d = spec.domain
    domain = np.array([d.x0, d.y0]) + rng.random((sizes.domain, 2)) * np.array(d.sides)
    traction = _draw_on_segments(spec.segments_with(SegmentRole.TRACTION), sizes.traction, rng)
    contact_segments = spec.segments_with(SegmentRole.CONTACT)
    if contact_segments:
        contact = np.concatenate(
            [pts for _, pts in _draw_on_segments(contact_segments, sizes.contact, rng)]
        )
    else:
        contact = np.zeros((0, 2))
    return SampleBatch(
        domain=domain,
        traction=traction,
        contact=contact,
        measures=_measures(spec),
        counts=(sizes.domain, sizes.traction, sizes.contact),
    )


@dataclass(frozen=True)
class GridLevel:
    """Lattice points of one multigrid level."""

    level: int
    step: float
    spec: ProblemSpec
    domain: Array
    boundary: Dict[str, Array]


def interior_multiples(lo: float, hi: float, step: float) -> Array:
    """Multiples of ``step`` lying strictly between ``lo`` and ``hi``."""
    k_lo = int(np.floor(lo / step)) - 1
    k_hi = int(np.ceil(hi / step)) + 1
    values = np.arange(k_lo, k_hi + 1) * step
    return values[(values > lo + LATTICE_TOL) & (values < hi - LATTICE_TOL)]


def _segment_lattice(segment: Segment, step: float) -> Array:
    (x0, y0), (x1, y1) = segment.start, segment.end
    if y0 == y1:
        xs = interior_multiples(min(x0, x1), max(x0, x1), step)
        return np.column_stack([xs, np.full_like(xs, y0)])
    if x0 == x1:
        ys = interior_multiples(min(y0, y1), max(y0, y1), step)
        return np.column_stack([np.full_like(ys, x0), ys])
    raise ContractViolation(f"Lattice sampling needs axis-aligned segments, got {segment.name}")


def build_grid(spec: ProblemSpec, level: int, finest_step: float, levels: int) -> GridLevel:
    """Lattice of step 2**(level-1) * finest_step over the body and its sampled boundaries."""
    if not 1 <= level <= levels:
        raise ContractViolation(f"Grid level {level} outside 1..{levels}")
    if finest_step <= 0:
        raise ContractViolation(f"Grid step must be positive, got {finest_step}")
    step = 2.0 ** (level - 1) * finest_step
    d = spec.domain
    xs = interior_multiples(d.x0, d.x1, step)
    ys = interior_multiples(d.y0, d.y1, step)
    if xs.size == 0 or ys.size == 0:
        raise EmptyGridError(
            f"Level {level} (step {step:g}) has no interior points in the domain",
            details={"level": level, "step": step},
        )
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    domain = np.column_stack([gx.ravel(), gy.ravel()])

    boundary: Dict[str, Array] = {}
    for segment in spec.segments:
        if segment.role == SegmentRole.DIRICHLET:
            continue
        points = _segment_lattice(segment, step)
        if points.shape[0] == 0:
            raise EmptyGridError(
                f"Level {level} (step {step:g}) has no points on segment '{segment.name}'",
                details={"level": level, "step": step, "segment": segment.name},
            )
        boundary[segment.name] = points
    return GridLevel(level, step, spec, domain, boundary)


def build_grids(spec: ProblemSpec, finest_step: float, levels: int) -> List[GridLevel]:
    return [build_grid(spec, p, finest_step, levels) for p in range(1, levels + 1)]


def _choose(points: Array, k: int, rng: np.random.Generator) -> Array:
    return points[rng.integers(0, points.shape[0], size=k)]


def sample_from_grid(grid: GridLevel, sizes: SampleSizes, rng: np.random.Generator) -> SampleBatch:
    """Uniform draws with replacement from the level's lattice point sets."""
    spec = grid.spec
    domain = _choose(grid.domain, sizes.domain, rng)

    traction_segments = spec.segments_with(SegmentRole.TRACTION)
    counts = allocate(sizes.traction, [s.length for s in traction_segments])
    traction = tuple(
        (s.name, _choose(grid.boundary[s.name], k, rng))
        for s, k in zip(traction_segments, counts)
    )

    contact_segments = spec.segments_with(SegmentRole.CONTACT)
    if contact_segments:
        counts = allocate(sizes.contact, [s.length for s in contact_segments])
        contact = np.concatenate(
            [_choose(grid.boundary[s.name], k, rng) for s, k in zip(contact_segments, counts)]
        )
    else:
        contact = np.zeros((0, 2))

    return SampleBatch(
        domain=domain,
        traction=traction,
        contact=contact,
        measures=_measures(spec),
        counts=(sizes.domain, sizes.traction, sizes.contact),
    )


def shard_batch(batch: SampleBatch, shards: int) -> List[SampleBatch]:
    """Split into contiguous shards that keep the global normalisers."""
    if shards < 1:
        raise ContractViolation(f"Shard count must be positive, got {shards}")
    shards = max(1, min(shards, batch.domain.shape[0]))
    if shards == 1:
        return [batch]
    domain = np.array_split(batch.domain, shards)
    contact = np.array_split(batch.contact, shards)
    traction = [
        (name, np.array_split(points, shards)) for name, points in batch.traction
    ]
    return [
        replace(
            batch,
            domain=domain[i],
            contact=contact[i],
            traction=tuple((name, parts[i]) for name, parts in traction),
        )
        for i in range(shards)
    ]
