"""
Nested automatic differentiation.

Reverse mode over parameters is recorded on a :class:`Tape` whose nodes hold
numpy arrays (one entry per sample point, so a whole batch is a single node).
Forward mode over the spatial input is carried by :class:`DualScalar`, whose value
and tangent slots are themselves tape variables. Spatial derivatives of the
network are therefore ordinary tape expressions and remain differentiable with
respect to every parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from ..exceptions import ContractViolation

Array = npt.NDArray[np.float64]
GradVector = Array
VJP = Callable[[Array], Array]
Operand = Union["Var", Array, float]


@dataclass(frozen=True)
class TapeNode:
    """A single recorded operation."""

    kind: str
    value: Array
    parents: Tuple[int, ...]
    vjps: Tuple[VJP, ...]


class Tape:
    """Append-only record of operations, single owner, single thread."""

    def __init__(self) -> None:
        self.nodes: List[TapeNode] = []

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def next_id(self) -> int:
        return len(self.nodes)

    def record(
        self,
        kind: str,
        value: npt.ArrayLike,
        parents: Sequence[Tuple["Var", VJP]] = (),
    ) -> "Var":
        """Append a node; parents must already live on this tape."""
        for parent, _ in parents:
            if parent.tape is not self:
                raise ContractViolation("Cannot mix variables from different tapes")
        node = TapeNode(
            kind=kind,
            value=np.asarray(value, dtype=np.float64),
            parents=tuple(parent.index for parent, _ in parents),
            vjps=tuple(vjp for _, vjp in parents),
        )
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    def leaf(self, value: npt.ArrayLike) -> "Var":
        """Differentiable input (parameters, sample coordinates)."""
        return self.record("leaf", np.array(value, dtype=np.float64, copy=True))

    def constant(self, value: npt.ArrayLike) -> "Var":
        return self.record("const", np.array(value, dtype=np.float64, copy=True))


class Var:
    """Handle to a tape node. Supports numpy-style arithmetic with broadcasting."""

    __slots__ = ("tape", "index")
    # make ndarray <op> Var dispatch to the reflected Var method
    __array_ufunc__ = None

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> Array:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    @property
    def T(self) -> "Var":
        return transpose(self)

    def __repr__(self) -> str:
        return f"Var(index={self.index}, shape={self.shape})"

    def __add__(self, other: Operand) -> "Var":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Var":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Var":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Var":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Var":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Var":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Var":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Var":
        return div(other, self)

    def __matmul__(self, other: Operand) -> "Var":
        return matmul(self, other)

    def __rmatmul__(self, other: Operand) -> "Var":
        return matmul(other, self)

    def __neg__(self) -> "Var":
        return neg(self)

    def __pow__(self, exponent: int) -> "Var":
        return power(self, exponent)

    def __getitem__(self, index: object) -> "Var":
        return getitem(self, index)

    def sum(self, axis: Optional[int] = None) -> "Var":
        return sum_(self, axis)

    def reshape(self, *shape: int) -> "Var":
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_array(x: Operand) -> Array:
    """Numeric value of a tape variable or plain operand."""
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _tape_of(*operands: Operand) -> Optional[Tape]:
    for operand in operands:
        if isinstance(operand, Var):
            return operand.tape
    return None


def _unbroadcast(grad: Array, shape: Tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(kind: str, a: Operand, b: Operand, value: Array, vjp_a: VJP, vjp_b: VJP):
    tape = _tape_of(a, b)
    if tape is None:
        return value
    parents = []
    if isinstance(a, Var):
        parents.append((a, vjp_a))
    if isinstance(b, Var):
        parents.append((b, vjp_b))
    return tape.record(kind, value, parents)


def _unary(kind: str, x: Operand, value: Array, vjp: VJP):
    if not isinstance(x, Var):
        return value
    return x.tape.record(kind, value, [(x, vjp)])


# Arithmetic primitives

def add(a: Operand, b: Operand):
    av, bv = as_array(a), as_array(b)
    return _binary(
        "add", a, b, av + bv,
        lambda g: _unbroadcast(g, av.shape),
        lambda g: _unbroadcast(g, bv.shape),
    )


def sub(a: Operand, b: Operand):
    av, bv = as_array(a), as_array(b)
    return _binary(
        "sub", a, b, av - bv,
        lambda g: _unbroadcast(g, av.shape),
        lambda g: -_unbroadcast(g, bv.shape),
    )


def mul(a: Operand, b: Operand):
    av, bv = as_array(a), as_array(b)
    return _binary(
        "mul", a, b, av * bv,
        lambda g: _unbroadcast(g * bv, av.shape),
        lambda g: _unbroadcast(g * av, bv.shape),
    )


def div(a: Operand, b: Operand):
    av, bv = as_array(a), as_array(b)
    return _binary(
        "div", a, b, av / bv,
        lambda g: _unbroadcast(g / bv, av.shape),
        lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape),
    )


def matmul(a: Operand, b: Operand):
    av, bv = as_array(a), as_array(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ContractViolation(
            f"matmul expects 2-D operands, got shapes {av.shape} and {bv.shape}"
        )
    return _binary(
        "matmul", a, b, av @ bv,
        lambda g: g @ bv.T,
        lambda g: av.T @ g,
    )


def neg(x: Operand):
    return _unary("neg", x, -as_array(x), lambda g: -g)


def tanh(x: Operand):
    t = np.tanh(as_array(x))
    return _unary("tanh", x, t, lambda g: g * (1.0 - t * t))


def exp(x: Operand):
    e = np.exp(as_array(x))
    return _unary("exp", x, e, lambda g: g * e)


def relu(x: Operand):
    """max(x, 0); subgradient 0 at the kink."""
    xv = as_array(x)
    return _unary("relu", x, np.maximum(xv, 0.0), lambda g: g * (xv > 0.0))


def square(x: Operand):
    xv = as_array(x)
    return _unary("square", x, xv * xv, lambda g: 2.0 * xv * g)


def power(x: Operand, exponent: int):
    if exponent < 1:
        raise ContractViolation(f"power expects a positive integer exponent, got {exponent}")
    if exponent == 1:
        return x
    xv = as_array(x)
    return _unary(
        "power", x, xv**exponent,
        lambda g: exponent * xv ** (exponent - 1) * g,
    )


def sqrt(x: Operand):
    """Square root; subgradient 0 at 0."""
    s = np.sqrt(as_array(x))

    def vjp(g: Array) -> Array:
        safe = np.where(s > 0.0, s, 1.0)
        return np.where(s > 0.0, g / (2.0 * safe), 0.0)

    return _unary("sqrt", x, s, vjp)


def norm(x: Operand, axis: int = -1):
    """Euclidean norm along ``axis``; subgradient 0 at the origin."""
    xv = as_array(x)
    n = np.sqrt(np.sum(xv * xv, axis=axis))

    def vjp(g: Array) -> Array:
        safe = np.expand_dims(np.where(n > 0.0, n, 1.0), axis)
        scale = np.expand_dims(np.where(n > 0.0, g, 0.0), axis)
        return scale * xv / safe

    return _unary("norm", x, n, vjp)


def sum_(x: Operand, axis: Optional[int] = None):
    xv = as_array(x)

    def vjp(g: Array) -> Array:
        if axis is None:
            return np.broadcast_to(g, xv.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), xv.shape).copy()

    return _unary("sum", x, np.sum(xv, axis=axis), vjp)


def reshape(x: Operand, shape: Union[int, Tuple[int, ...]]):
    xv = as_array(x)
    return _unary("reshape", x, xv.reshape(shape), lambda g: g.reshape(xv.shape))


def transpose(x: Operand):
    return _unary("transpose", x, as_array(x).T, lambda g: g.T)


def _is_basic_index(index: object) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(item, (int, slice, type(Ellipsis))) for item in items)


def getitem(x: Operand, index: object):
    xv = as_array(x)

    def vjp(g: Array) -> Array:
        out = np.zeros_like(xv)
        if _is_basic_index(index):
            out[index] = g
        else:
            np.add.at(out, index, g)
        return out

    return _unary("getitem", x, xv[index], vjp)


def stack(items: Sequence[Operand], axis: int = -1):
    values = [as_array(item) for item in items]
    stacked = np.stack(values, axis=axis)
    tape = _tape_of(*items)
    if tape is None:
        return stacked
    parents = [
        (item, (lambda g, i=i: np.take(g, i, axis=axis)))
        for i, item in enumerate(items)
        if isinstance(item, Var)
    ]
    return tape.record("stack", stacked, parents)


# Reverse sweep

def _sweep(loss: Var, wrt: Sequence[Var]) -> List[GradVector]:
    if not isinstance(loss, Var):
        raise ContractViolation("backward() needs a tape variable")
    if loss.size != 1:
        raise ContractViolation(
            f"backward() needs a scalar loss, got shape {loss.shape}"
        )
    tape = loss.tape
    adjoints: List[Optional[Array]] = [None] * (loss.index + 1)
    adjoints[loss.index] = np.ones_like(loss.value)

    for i in range(loss.index, -1, -1):
        g = adjoints[i]
        if g is None:
            continue
        node = tape.nodes[i]
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(g)
            current = adjoints[parent]
            adjoints[parent] = contrib if current is None else current + contrib

    grads = []
    for var in wrt:
        if var.tape is not tape:
            raise ContractViolation("Gradient target lives on a different tape")
        g = adjoints[var.index] if var.index <= loss.index else None
        grads.append(np.zeros_like(var.value) if g is None else np.asarray(g))
    return grads


def backward(loss: Var, wrt: Var) -> GradVector:
    """Exact reverse-mode gradient of a scalar ``loss`` with respect to ``wrt``."""
    return _sweep(loss, [wrt])[0]


def backward_many(loss: Var, wrt: Sequence[Var]) -> List[GradVector]:
    return _sweep(loss, wrt)


# Forward-mode duals

@dataclass(frozen=True)
class DualScalar:
    """
    Value plus one tangent per seeded spatial direction.

    Entries are tape variables (or plain arrays for constants), one entry per
    sample point. Arithmetic follows exact forward-mode rules.
    """

    value: Operand
    tangents: Tuple[Operand, ...] = ()

    __array_ufunc__ = None

    @classmethod
    def constant(cls, value: npt.ArrayLike, directions: int = 2) -> "DualScalar":
        v = np.asarray(value, dtype=np.float64)
        return cls(v, tuple(np.zeros_like(v) for _ in range(directions)))

    @property
    def directions(self) -> int:
        return len(self.tangents)

    def _check(self, other: "DualScalar") -> None:
        if self.directions != other.directions:
            raise ContractViolation(
                f"Dual tangent counts differ: {self.directions} vs {other.directions}"
            )

    def __add__(self, other: Union["DualScalar", Operand]) -> "DualScalar":
        if isinstance(other, DualScalar):
            self._check(other)
            return DualScalar(
                add(self.value, other.value),
                tuple(add(a, b) for a, b in zip(self.tangents, other.tangents)),
            )
        return DualScalar(add(self.value, other), self.tangents)

    __radd__ = __add__

    def __neg__(self) -> "DualScalar":
        return DualScalar(neg(self.value), tuple(neg(t) for t in self.tangents))

    def __sub__(self, other: Union["DualScalar", Operand]) -> "DualScalar":
        if isinstance(other, DualScalar):
            return self + (-other)
        return DualScalar(sub(self.value, other), self.tangents)

    def __rsub__(self, other: Operand) -> "DualScalar":
        return (-self) + other

    def __mul__(self, other: Union["DualScalar", Operand]) -> "DualScalar":
        if isinstance(other, DualScalar):
            self._check(other)
            return DualScalar(
                mul(self.value, other.value),
                tuple(
                    add(mul(self.value, tb), mul(other.value, ta))
                    for ta, tb in zip(self.tangents, other.tangents)
                ),
            )
        return DualScalar(
            mul(self.value, other), tuple(mul(t, other) for t in self.tangents)
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Union["DualScalar", Operand]) -> "DualScalar":
        if isinstance(other, DualScalar):
            self._check(other)
            q = div(self.value, other.value)
            return DualScalar(
                q,
                tuple(
                    div(sub(ta, mul(q, tb)), other.value)
                    for ta, tb in zip(self.tangents, other.tangents)
                ),
            )
        return DualScalar(
            div(self.value, other), tuple(div(t, other) for t in self.tangents)
        )

    def __getitem__(self, index: object) -> "DualScalar":
        return DualScalar(
            getitem(self.value, index), tuple(getitem(t, index) for t in self.tangents)
        )

    def matmul(self, weight: Operand) -> "DualScalar":
        """Right-multiply by an x-independent matrix (``h @ weight``)."""
        return DualScalar(
            matmul(self.value, weight), tuple(matmul(t, weight) for t in self.tangents)
        )

    def tanh(self) -> "DualScalar":
        t = tanh(self.value)
        slope = sub(1.0, square(t)) if self.tangents else None
        return DualScalar(t, tuple(mul(slope, tk) for tk in self.tangents))

    def relu_power(self, alpha: int) -> "DualScalar":
        """(max(x, 0))**alpha with derivative alpha * max(x, 0)**(alpha - 1)."""
        r = relu(self.value)
        value = power(r, alpha)
        if not self.tangents:
            return DualScalar(value)
        if alpha == 1:
            slope: Operand = (as_array(self.value) > 0.0).astype(np.float64)
        else:
            slope = mul(float(alpha), power(r, alpha - 1))
        return DualScalar(value, tuple(mul(slope, tk) for tk in self.tangents))


def stack_duals(items: Sequence[DualScalar], axis: int = -1) -> DualScalar:
    directions = {item.directions for item in items}
    if len(directions) != 1:
        raise ContractViolation("Cannot stack duals with different tangent counts")
    (count,) = directions
    return DualScalar(
        stack([item.value for item in items], axis=axis),
        tuple(stack([item.tangents[k] for item in items], axis=axis) for k in range(count)),
    )


def seed_input(
    points: npt.ArrayLike, tape: Tape, with_tangents: bool = True
) -> Tuple[DualScalar, DualScalar]:
    """
    Seed coordinates as tape leaves with the spatial tangent basis.

    ``points`` is a single point ``(2,)`` or a batch ``(n, 2)``. x carries
    tangents (1, 0) and y carries (0, 1). With ``with_tangents=False`` no
    tangent slots are seeded (value-only evaluation).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ContractViolation(f"Expected points of shape (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ContractViolation("Input points must be finite")

    x = tape.leaf(pts[:, 0])
    y = tape.leaf(pts[:, 1])
    if not with_tangents:
        return DualScalar(x), DualScalar(y)

    ones = tape.constant(np.ones(pts.shape[0]))
    zeros = tape.constant(np.zeros(pts.shape[0]))
    return DualScalar(x, (ones, zeros)), DualScalar(y, (zeros, ones))


def finite_diff_gradient(
    f: Callable[[Array], float], theta: npt.ArrayLike, step: float = 1e-6
) -> GradVector:
    """Central-difference gradient, one coordinate at a time."""
    if step <= 0.0:
        raise ContractViolation(f"Finite-difference step must be positive, got {step}")
    base = np.array(theta, dtype=np.float64, copy=True)
    flat = base.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = float(f(base))
        flat[i] = original - step
        minus = float(f(base))
        flat[i] = original
        grad[i] = (plus - minus) / (2.0 * step)
    return grad.reshape(base.shape)
