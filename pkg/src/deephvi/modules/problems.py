"""
Benchmark contact problems.

Each problem bundles a rectangular body, its boundary partition, a linear
elasticity law, the applied loads, the nonsmooth superpotential acting on the
contact boundary and the constraint mask used by the network ansatz.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import sympy

from ..exceptions import ContractViolation, SingularLawError
from ..utils.symbolic import X, Y, Expression, lambdify_jacobian, lambdify_vector, to_expr
from .autodiff import Operand, add, as_array, exp, mul, norm, sqrt, square, sub
from .network import ConstraintMask

Array = npt.NDArray[np.float64]
Loads = Callable[[Array, str], Array]

BOUNDARY_TOL = 1e-12
DOMAIN_TAG = "domain"


class Regime(str, Enum):
    PLANE_STRESS = "plane_stress"
    PLANE_STRAIN = "plane_strain"


class SegmentRole(str, Enum):
    DIRICHLET = "dirichlet"
    TRACTION = "traction"
    CONTACT = "contact"


class PotentialKind(str, Enum):
    TANGENTIAL_FRICTION = "tangential_friction"
    NORMAL_COMPLIANCE = "normal_compliance"
    NONE = "none"


# Symmetric tensors and the elasticity law

@dataclass(frozen=True)
class SymmetricTensor:
    """2x2 symmetric tensor stored by its three independent entries."""

    xx: Operand
    xy: Operand
    yy: Operand

    @classmethod
    def from_matrix(cls, m: npt.ArrayLike) -> "SymmetricTensor":
        a = np.asarray(m, dtype=np.float64)
        if a.shape[-2:] != (2, 2):
            raise ContractViolation(f"Expected a 2x2 matrix, got shape {a.shape}")
        if not np.allclose(a[..., 0, 1], a[..., 1, 0], rtol=1e-12, atol=1e-12):
            raise ContractViolation("Tensor is not symmetric")
        return cls(a[..., 0, 0], a[..., 0, 1], a[..., 1, 1])

    @property
    def trace(self) -> Operand:
        return add(self.xx, self.yy)

    def contract(self, other: "SymmetricTensor") -> Operand:
        """Full contraction A_ij B_ij = A11 B11 + 2 A12 B12 + A22 B22."""
        return add(
            add(mul(self.xx, other.xx), mul(2.0, mul(self.xy, other.xy))),
            mul(self.yy, other.yy),
        )


@dataclass(frozen=True)
class ElasticityLaw:
    """Isotropic linear elasticity in plane stress or plane strain."""

    young_modulus: float
    poisson_ratio: float
    regime: Regime = Regime.PLANE_STRESS
    units: str = ""

    def coefficients(self) -> Tuple[float, float]:
        """(lambda, 2 mu) such that sigma = lambda tr(eps) I + 2 mu eps."""
        E, k = self.young_modulus, self.poisson_ratio
        if self.regime == Regime.PLANE_STRAIN:
            denominator = (1.0 + k) * (1.0 - 2.0 * k)
        else:
            denominator = 1.0 - k * k
        if abs(denominator) < 1e-14:
            raise SingularLawError(
                f"{self.regime.value} law is singular for Poisson ratio {k}",
                details={"poisson_ratio": k, "regime": self.regime.value},
            )
        return E * k / denominator, E / (1.0 + k)

    def coercivity(self) -> float:
        """Smallest eigenvalue of the law on symmetric tensors."""
        lam, two_mu = self.coefficients()
        return min(two_mu, two_mu + 2.0 * lam)


def apply_elasticity(law: ElasticityLaw, eps: SymmetricTensor) -> SymmetricTensor:
    lam, two_mu = law.coefficients()
    volumetric = mul(lam, eps.trace)
    return SymmetricTensor(
        add(volumetric, mul(two_mu, eps.xx)),
        mul(two_mu, eps.xy),
        add(volumetric, mul(two_mu, eps.yy)),
    )


# Superpotentials

FRICTION_SLOPE = 450.0
FRICTION_DECAY = 2000.0


def friction_of_norm(r: Operand) -> Operand:
    """Closed form of int_0^r (450 exp(-2000 t) + 450) dt."""
    tail = sub(1.0, exp(mul(-FRICTION_DECAY, r)))
    return add(mul(FRICTION_SLOPE, r), mul(FRICTION_SLOPE / FRICTION_DECAY, tail))


def friction_density(t: float) -> float:
    """Integrand of the friction potential (exposed for quadrature checks)."""
    return FRICTION_SLOPE * np.exp(-FRICTION_DECAY * t) + FRICTION_SLOPE


def _euclidean_norm(z: Union[Sequence[Operand], Array]) -> Operand:
    if isinstance(z, (tuple, list)):
        return sqrt(add(square(z[0]), square(z[1])))
    return norm(z, axis=-1)


def j_tau(z: Union[Sequence[Operand], Array]) -> Operand:
    """
    Tangential friction potential of the tangential trace.

    ``z`` is either a pair of components (numpy or tape) or a numpy array whose
    last axis holds the two components.
    """
    return friction_of_norm(_euclidean_norm(z))


# (lower, upper, (c2, c1, c0)) with upper bound inclusive on the first piece
_COMPLIANCE_PIECES = (
    (0.0, 0.1, (50.0, 0.1, 0.0)),
    (0.1, 0.15, (-50.0, 20.1, -1.0)),
    (0.15, np.inf, (200.0, -54.9, 4.625)),
)


def _compliance_indicators(u: Array) -> List[Array]:
    return [
        ((u > 0.0) & (u <= 0.1)).astype(np.float64),
        ((u > 0.1) & (u < 0.15)).astype(np.float64),
        (u >= 0.15).astype(np.float64),
    ]


def j_nu(u: Operand) -> Operand:
    """
    Normal compliance potential.

    0 for u <= 0, then three quadratic pieces joined continuously at 0.1 and
    0.15. Branch selection uses the current value, so on a tape the result is
    differentiable piece by piece.
    """
    indicators = _compliance_indicators(np.asarray(as_array(u)))
    total: Operand = np.zeros_like(np.asarray(as_array(u)))
    u2 = square(u)
    for weight, (_, _, (c2, c1, c0)) in zip(indicators, _COMPLIANCE_PIECES):
        piece = add(add(mul(c2, u2), mul(c1, u)), c0)
        total = add(total, mul(weight, piece))
    return total


def j_nu_derivative(u: npt.ArrayLike) -> Array:
    """Pointwise derivative of j_nu (right derivative at 0)."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    for weight, (_, _, (c2, c1, _)) in zip(_compliance_indicators(u), _COMPLIANCE_PIECES):
        out = out + weight * (2.0 * c2 * u + c1)
    return out


@dataclass(frozen=True)
class SuperPotential:
    kind: PotentialKind = PotentialKind.NONE

    def __call__(
        self, normal: Operand, tangential: Sequence[Operand]
    ) -> Optional[Operand]:
        """Per-point potential of the contact traces; None when there is no potential."""
        if self.kind == PotentialKind.TANGENTIAL_FRICTION:
            return j_tau(tangential)
        if self.kind == PotentialKind.NORMAL_COMPLIANCE:
            return j_nu(normal)
        return None

    @property
    def is_none(self) -> bool:
        return self.kind == PotentialKind.NONE


# Geometry

@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ContractViolation(f"Degenerate rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def sides(self) -> Tuple[float, float]:
        return self.x1 - self.x0, self.y1 - self.y0

    def contains(self, points: npt.ArrayLike, tol: float = BOUNDARY_TOL) -> npt.NDArray[np.bool_]:
        """Closure membership with tolerance."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return (
            (p[:, 0] >= self.x0 - tol)
            & (p[:, 0] <= self.x1 + tol)
            & (p[:, 1] >= self.y0 - tol)
            & (p[:, 1] <= self.y1 + tol)
        )

    def edge(self, side: str, role: SegmentRole) -> "Segment":
        corners = {
            "left": ((self.x0, self.y0), (self.x0, self.y1), (-1.0, 0.0)),
            "right": ((self.x1, self.y0), (self.x1, self.y1), (1.0, 0.0)),
            "bottom": ((self.x0, self.y0), (self.x1, self.y0), (0.0, -1.0)),
            "top": ((self.x0, self.y1), (self.x1, self.y1), (0.0, 1.0)),
        }
        if side not in corners:
            raise ContractViolation(f"Unknown side '{side}'")
        start, end, normal = corners[side]
        return Segment(side, role, start, end, normal)


@dataclass(frozen=True)
class Segment:
    """Straight boundary piece with outward unit normal."""

    name: str
    role: SegmentRole
    start: Tuple[float, float]
    end: Tuple[float, float]
    normal: Tuple[float, float]

    @property
    def length(self) -> float:
        return float(np.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))

    @property
    def direction(self) -> Array:
        return (np.asarray(self.end) - np.asarray(self.start)) / self.length

    def point_at(self, t: npt.ArrayLike) -> Array:
        """Points start + t (end - start) for t in [0, 1]."""
        t = np.asarray(t, dtype=np.float64)[:, None]
        return np.asarray(self.start) + t * (np.asarray(self.end) - np.asarray(self.start))

    def contains(self, points: npt.ArrayLike, tol: float = BOUNDARY_TOL) -> npt.NDArray[np.bool_]:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64)) - np.asarray(self.start)
        d = np.asarray(self.end) - np.asarray(self.start)
        along = p @ d / (self.length**2)
        offset = np.abs(p[:, 0] * d[1] - p[:, 1] * d[0]) / self.length
        return (offset <= tol) & (along >= -tol) & (along <= 1.0 + tol)


# Problem descriptor

@dataclass(frozen=True)
class ExactSolution:
    """Closed-form displacement and its Jacobian ``[:, i, k] = du_i/dx_k``."""

    components: Tuple[sympy.Expr, sympy.Expr]
    value: Callable[[Array], Array] = field(repr=False)
    jacobian: Callable[[Array], Array] = field(repr=False)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: Rectangle
    segments: Tuple[Segment, ...]
    law: ElasticityLaw
    loads: Loads = field(repr=False)
    potential: SuperPotential
    mask: ConstraintMask
    description: str = ""
    exact: Optional[ExactSolution] = None

    def __post_init__(self) -> None:
        if self.dirichlet_length <= 0.0:
            raise ContractViolation(f"Problem '{self.name}' has no Dirichlet boundary")
        if self.contact_length <= 0.0 and not self.potential.is_none:
            raise ContractViolation(
                f"Problem '{self.name}' has a superpotential but no contact boundary"
            )
        names = [s.name for s in self.segments]
        if len(set(names)) != len(names):
            raise ContractViolation(f"Duplicate segment names in problem '{self.name}'")

    def segments_with(self, role: SegmentRole) -> Tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.role == role)

    def segment(self, name: str) -> Segment:
        for s in self.segments:
            if s.name == name:
                return s
        raise ContractViolation(f"Problem '{self.name}' has no segment '{name}'")

    @property
    def area(self) -> float:
        return self.domain.area

    @property
    def dirichlet_length(self) -> float:
        return sum(s.length for s in self.segments_with(SegmentRole.DIRICHLET))

    @property
    def traction_length(self) -> float:
        return sum(s.length for s in self.segments_with(SegmentRole.TRACTION))

    @property
    def contact_length(self) -> float:
        return sum(s.length for s in self.segments_with(SegmentRole.CONTACT))

    @property
    def contact_normal(self) -> Array:
        contact = self.segments_with(SegmentRole.CONTACT)
        if not contact:
            raise ContractViolation(f"Problem '{self.name}' has no contact boundary")
        normals = {s.normal for s in contact}
        if len(normals) != 1:
            raise ContractViolation("Contact segments with different normals are not supported")
        return np.asarray(contact[0].normal, dtype=np.float64)

    def body_force(self, points: Array) -> Array:
        return self.loads(points, DOMAIN_TAG)

    def traction(self, points: Array, segment: str) -> Array:
        return self.loads(points, segment)


def _check_region(points: Array, tag: str, regions: Dict[str, Callable[[Array], npt.NDArray[np.bool_]]]) -> Array:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if tag not in regions:
        raise ContractViolation(f"Unknown load region '{tag}'", details={"tag": tag})
    inside = regions[tag](pts)
    if not np.all(inside):
        bad = pts[~inside][0].tolist()
        raise ContractViolation(
            f"Point {bad} does not lie on region '{tag}'", details={"tag": tag, "point": bad}
        )
    return pts


# Bilateral contact with Tresca-like friction on the bottom edge

BILATERAL_DOMAIN = Rectangle(0.0, 0.0, 4.0, 4.0)
BILATERAL_LAW = ElasticityLaw(2000.0, 0.4, Regime.PLANE_STRESS, units="daN/mm^2")
BILATERAL_MASK = ConstraintMask("bilateral", ("(4 - x)/4", "(4 - x)*y/8"))


def loads_example1(points: npt.ArrayLike, tag: str) -> Array:
    """Body force on ``"domain"``; tractions on the ``"left"`` and ``"top"`` edges."""
    d = BILATERAL_DOMAIN
    pts = _check_region(
        np.asarray(points, dtype=np.float64),
        tag,
        {
            DOMAIN_TAG: d.contains,
            "left": d.edge("left", SegmentRole.TRACTION).contains,
            "top": d.edge("top", SegmentRole.TRACTION).contains,
        },
    )
    out = np.zeros((pts.shape[0], 2))
    if tag == "left":
        out[:, 0] = 200.0 * (5.0 - pts[:, 1])
        out[:, 1] = -200.0
    return out


def bilateral_problem() -> ProblemSpec:
    d = BILATERAL_DOMAIN
    return ProblemSpec(
        name="bilateral",
        domain=d,
        segments=(
            d.edge("right", SegmentRole.DIRICHLET),
            d.edge("left", SegmentRole.TRACTION),
            d.edge("top", SegmentRole.TRACTION),
            d.edge("bottom", SegmentRole.CONTACT),
        ),
        law=BILATERAL_LAW,
        loads=loads_example1,
        potential=SuperPotential(PotentialKind.TANGENTIAL_FRICTION),
        mask=BILATERAL_MASK,
        description="Bilateral contact with nonmonotone friction, plane stress, (0,4)^2",
    )


# Frictionless normal compliance on the bottom edge

COMPLIANCE_DOMAIN = Rectangle(0.0, 0.0, 1.0, 1.0)
COMPLIANCE_LAW = ElasticityLaw(70.0, 0.3, Regime.PLANE_STRAIN, units="GPa")
COMPLIANCE_MASK = ConstraintMask("normal-compliance", ("x*(1 - x)", "x*(1 - x)"))


def loads_example2(points: npt.ArrayLike, tag: str) -> Array:
    d = COMPLIANCE_DOMAIN
    pts = _check_region(
        np.asarray(points, dtype=np.float64),
        tag,
        {
            DOMAIN_TAG: d.contains,
            "top": d.edge("top", SegmentRole.TRACTION).contains,
        },
    )
    out = np.zeros((pts.shape[0], 2))
    if tag == "top":
        out[:, 1] = -52.0
    return out


def normal_compliance_problem() -> ProblemSpec:
    d = COMPLIANCE_DOMAIN
    return ProblemSpec(
        name="normal-compliance",
        domain=d,
        segments=(
            d.edge("left", SegmentRole.DIRICHLET),
            d.edge("right", SegmentRole.DIRICHLET),
            d.edge("top", SegmentRole.TRACTION),
            d.edge("bottom", SegmentRole.CONTACT),
        ),
        law=COMPLIANCE_LAW,
        loads=loads_example2,
        potential=SuperPotential(PotentialKind.NORMAL_COMPLIANCE),
        mask=COMPLIANCE_MASK,
        description="Frictionless normal compliance, plane strain, (0,1)^2",
    )


# Manufactured linear-elasticity problem

DEFAULT_MANUFACTURED = ("x*(1 - x)*y", "0")


def symbolic_stress(
    law: ElasticityLaw, u: Sequence[Expression]
) -> Tuple[Tuple[sympy.Expr, sympy.Expr], Tuple[sympy.Expr, sympy.Expr]]:
    """Stress matrix of a closed-form displacement as sympy expressions."""
    u1, u2 = (to_expr(c) for c in u)
    e11 = sympy.diff(u1, X)
    e22 = sympy.diff(u2, Y)
    e12 = (sympy.diff(u1, Y) + sympy.diff(u2, X)) / 2
    lam, two_mu = law.coefficients()
    lam, two_mu = sympy.Float(lam), sympy.Float(two_mu)
    s11 = lam * (e11 + e22) + two_mu * e11
    s22 = lam * (e11 + e22) + two_mu * e22
    s12 = two_mu * e12
    return (s11, s12), (s12, s22)


def manufactured_problem(
    u_exact: Sequence[Expression] = DEFAULT_MANUFACTURED,
    law: ElasticityLaw = COMPLIANCE_LAW,
) -> ProblemSpec:
    """
    Linear elasticity on (0,1)^2 whose energy minimizer is ``u_exact``.

    Clamped on the left and right edges, loaded on the top and bottom edges by
    the tractions sigma(u_exact) n, with body force -div sigma(u_exact).
    """
    d = COMPLIANCE_DOMAIN
    u = tuple(sympy.simplify(to_expr(c)) for c in u_exact)
    if len(u) != 2:
        raise ContractViolation("Manufactured displacement needs two components")
    for c in u:
        for x_edge in (d.x0, d.x1):
            if sympy.simplify(c.subs(X, x_edge)) != 0:
                raise ContractViolation(
                    f"Manufactured displacement {c} does not vanish at x = {x_edge}"
                )

    sigma = symbolic_stress(law, u)
    f0 = tuple(
        -(sympy.diff(sigma[i][0], X) + sympy.diff(sigma[i][1], Y)) for i in range(2)
    )
    segments = (
        d.edge("left", SegmentRole.DIRICHLET),
        d.edge("right", SegmentRole.DIRICHLET),
        d.edge("bottom", SegmentRole.TRACTION),
        d.edge("top", SegmentRole.TRACTION),
    )
    compiled = {DOMAIN_TAG: lambdify_vector(f0)}
    regions = {DOMAIN_TAG: d.contains}
    for s in segments[2:]:
        n = s.normal
        compiled[s.name] = lambdify_vector(
            [sigma[i][0] * n[0] + sigma[i][1] * n[1] for i in range(2)]
        )
        regions[s.name] = s.contains

    def loads(points: npt.ArrayLike, tag: str) -> Array:
        pts = _check_region(np.asarray(points, dtype=np.float64), tag, regions)
        return compiled[tag](pts)

    return ProblemSpec(
        name="manufactured",
        domain=d,
        segments=segments,
        law=law,
        loads=loads,
        potential=SuperPotential(PotentialKind.NONE),
        mask=COMPLIANCE_MASK,
        description=f"Manufactured linear elasticity with u = ({u[0]}, {u[1]})",
        exact=ExactSolution(u, lambdify_vector(u), lambdify_jacobian(u)),
    )


PROBLEMS: Dict[str, Callable[[], ProblemSpec]] = {
    "bilateral": bilateral_problem,
    "normal-compliance": normal_compliance_problem,
    "manufactured": manufactured_problem,
}


def get_problem(name: str) -> ProblemSpec:
    """Build a registered problem by name."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ContractViolation(
            f"Unknown problem '{name}'. Available problems: {', '.join(PROBLEMS)}",
            details={"problem": name, "available": list(PROBLEMS)},
        ) from None
    return factory()
