"""
Stochastic energy functional.

    E(phi) = |Omega|/N   sum [ 1/2 sigma(phi):eps(phi) - f0 . phi ]
           - |Gamma_T|/N_T sum f2 . phi
           + |Gamma_C|/N_C sum j(trace of phi)

evaluated for the masked network field on a :class:`SampleBatch`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .autodiff import (
    GradVector,
    Operand,
    Tape,
    Var,
    add,
    as_array,
    backward,
    mul,
    sub,
    sum_,
)
from .network import BoundParams, ParamVector, masked_field
from .problems import ProblemSpec, SymmetricTensor, apply_elasticity
from .sampling import SampleBatch, shard_batch

Array = npt.NDArray[np.float64]
Pair = Tuple[Operand, Operand]
# Jacobian entries, [i][k] = d(phi_i)/d(x_k)
Jacobian = Sequence[Sequence[Operand]]

DomainField = Callable[[Array], Tuple[Pair, Jacobian]]
BoundaryField = Callable[[Array], Pair]


class StrainTensor(SymmetricTensor):
    """Linearized strain; the shear entry is shared by both off-diagonal slots."""


def strain(grad: Jacobian) -> StrainTensor:
    """eps = (grad + grad^T) / 2."""
    shear = mul(0.5, add(grad[0][1], grad[1][0]))
    return StrainTensor(grad[0][0], shear, grad[1][1])


@dataclass(frozen=True)
class EnergyBreakdown:
    bulk: float
    traction: float
    potential: float
    total: float

    @classmethod
    def of(cls, bulk: float, traction: float, potential: float) -> "EnergyBreakdown":
        return cls(bulk, traction, potential, bulk - traction + potential)

    @classmethod
    def zero(cls) -> "EnergyBreakdown":
        return cls(0.0, 0.0, 0.0, 0.0)

    def __add__(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        return EnergyBreakdown(
            self.bulk + other.bulk,
            self.traction + other.traction,
            self.potential + other.potential,
            self.total + other.total,
        )

    def scaled(self, factor: float) -> "EnergyBreakdown":
        return EnergyBreakdown(
            self.bulk * factor,
            self.traction * factor,
            self.potential * factor,
            self.total * factor,
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite([self.bulk, self.traction, self.potential, self.total])))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def contact_traces(phi: Pair, normal: npt.ArrayLike) -> Tuple[Operand, Pair]:
    """Normal trace phi . n and tangential trace phi - (phi . n) n."""
    n = np.asarray(normal, dtype=np.float64)
    phi_nu = add(mul(phi[0], float(n[0])), mul(phi[1], float(n[1])))
    phi_tau = (
        sub(phi[0], mul(phi_nu, float(n[0]))),
        sub(phi[1], mul(phi_nu, float(n[1]))),
    )
    return phi_nu, phi_tau


def _total(x: Operand) -> Operand:
    return sum_(x) if isinstance(x, Var) else np.sum(as_array(x))


def _dot(f: Array, phi: Pair) -> Operand:
    return add(mul(f[:, 0], phi[0]), mul(f[:, 1], phi[1]))


def assemble_energy(
    spec: ProblemSpec,
    batch: SampleBatch,
    domain_field: DomainField,
    boundary_field: BoundaryField,
) -> Tuple[Operand, Operand, Operand]:
    """
    (bulk, traction, potential) terms of the energy for any field.

    The field is given by callables returning numpy arrays or tape variables;
    terms with no points are plain zeros.
    """
    n_domain, n_traction, n_contact = batch.counts
    area, traction_length, contact_length = batch.measures

    bulk: Operand = 0.0
    if batch.domain.shape[0]:
        phi, grad = domain_field(batch.domain)
        eps = strain(grad)
        sigma = apply_elasticity(spec.law, eps)
        density = sub(
            mul(0.5, sigma.contract(eps)), _dot(spec.body_force(batch.domain), phi)
        )
        bulk = mul(area / n_domain, _total(density))

    traction: Operand = 0.0
    for name, points in batch.traction:
        if points.shape[0] == 0:
            continue
        work = _total(_dot(spec.traction(points, name), boundary_field(points)))
        traction = add(traction, work)
    traction = mul(traction_length / n_traction, traction)

    potential: Operand = 0.0
    if batch.contact.shape[0] and not spec.potential.is_none:
        phi_nu, phi_tau = contact_traces(boundary_field(batch.contact), spec.contact_normal)
        density = spec.potential(phi_nu, phi_tau)
        potential = mul(contact_length / n_contact, _total(density))

    return bulk, traction, potential


def _network_fields(
    params: BoundParams, spec: ProblemSpec, tape: Tape
) -> Tuple[DomainField, BoundaryField]:
    def domain_field(points: Array) -> Tuple[Pair, Jacobian]:
        phi = masked_field(params, spec.mask, points, tape)
        grad = [[phi[i].tangents[k] for k in range(2)] for i in range(2)]
        return (phi[0].value, phi[1].value), grad

    def boundary_field(points: Array) -> Pair:
        phi = masked_field(params, spec.mask, points, tape, with_gradient=False)
        return phi[0].value, phi[1].value

    return domain_field, boundary_field


def _breakdown(bulk: Operand, traction: Operand, potential: Operand) -> EnergyBreakdown:
    return EnergyBreakdown.of(
        float(as_array(bulk)), float(as_array(traction)), float(as_array(potential))
    )


def stochastic_energy(
    theta: ParamVector,
    spec: ProblemSpec,
    batch: SampleBatch,
    tape: Optional[Tape] = None,
) -> Tuple[Var, EnergyBreakdown, Var]:
    """
    Energy of the masked network on ``batch`` as a tape scalar.

    Returns the total, its breakdown and the parameter leaf to differentiate
    against.
    """
    tape = tape if tape is not None else Tape()
    bound = theta.bind(tape)
    domain_field, boundary_field = _network_fields(bound, spec, tape)
    bulk, traction, potential = assemble_energy(spec, batch, domain_field, boundary_field)
    total = add(sub(bulk, traction), potential)
    if not isinstance(total, Var):
        # no point touched the network; keep a scalar on the tape
        total = add(mul(0.0, sum_(bound.leaf)), total)
    return total, _breakdown(bulk, traction, potential), bound.leaf


def _shard_energy_and_gradient(
    theta: ParamVector, spec: ProblemSpec, batch: SampleBatch
) -> Tuple[EnergyBreakdown, GradVector]:
    total, breakdown, leaf = stochastic_energy(theta, spec, batch)
    return breakdown, backward(total, leaf)


def energy_and_gradient(
    theta: ParamVector,
    spec: ProblemSpec,
    batch: SampleBatch,
    workers: int = 1,
) -> Tuple[EnergyBreakdown, GradVector]:
    """
    Energy breakdown and exact parameter gradient.

    With ``workers > 1`` the batch is split into contiguous shards evaluated on
    separate tapes; results are reduced in shard order.
    """
    shards = shard_batch(batch, workers)
    if len(shards) == 1:
        return _shard_energy_and_gradient(theta, spec, shards[0])

    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        results: List[Tuple[EnergyBreakdown, GradVector]] = list(
            pool.map(lambda s: _shard_energy_and_gradient(theta, spec, s), shards)
        )
    breakdown = EnergyBreakdown.zero()
    grad = np.zeros_like(theta.values)
    for part, g in results:
        breakdown = breakdown + part
        grad = grad + g
    return breakdown, grad


def energy_value(
    theta: ParamVector, spec: ProblemSpec, batch: SampleBatch, chunks: int = 1
) -> EnergyBreakdown:
    """Energy breakdown only, accumulated over ``chunks`` throwaway tapes."""
    total = EnergyBreakdown.zero()
    for shard in shard_batch(batch, chunks):
        _, breakdown, _ = stochastic_energy(theta, spec, shard)
        total = total + breakdown
    return total


def field_energy(
    spec: ProblemSpec,
    batch: SampleBatch,
    value: Callable[[Array], Array],
    jacobian: Callable[[Array], Array],
) -> EnergyBreakdown:
    """
    Energy of a closed-form numpy field.

    ``value`` maps points to (n, 2); ``jacobian`` maps points to (n, 2, 2) with
    ``[:, i, k] = d(phi_i)/d(x_k)``.
    """

    def domain_field(points: Array) -> Tuple[Pair, Jacobian]:
        v, j = value(points), jacobian(points)
        return (v[:, 0], v[:, 1]), [[j[:, i, k] for k in range(2)] for i in range(2)]

    def boundary_field(points: Array) -> Pair:
        v = value(points)
        return v[:, 0], v[:, 1]

    return _breakdown(*assemble_energy(spec, batch, domain_field, boundary_field))

