"""
Solution ansatz: plain ResNet and block ResNet, flat parameter storage, and the
constraint-masked displacement field phi = b * psi.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from ..config import Activation, NetworkArch, NetworkKind
from ..exceptions import LayoutError
from ..utils.symbolic import Expression, lambdify_jacobian, lambdify_vector, to_expr
from .autodiff import DualScalar, Tape, Var, as_array, seed_input, stack_duals

Array = npt.NDArray[np.float64]

INPUT_BLOCK = 0


@dataclass(frozen=True)
class LayoutEntry:
    """Contiguous slice of the flat parameter vector holding one tensor."""

    block: int
    layer: int
    role: str  # "V", "W", "b" or "a"
    start: int
    stop: int
    shape: Tuple[int, ...]
    fan_in: int

    @property
    def size(self) -> int:
        return self.stop - self.start


class ParamLayout:
    """Maps (block, layer, role) to slices of the flat parameter vector."""

    def __init__(self, entries: Sequence[LayoutEntry]):
        self.entries: List[LayoutEntry] = list(entries)
        self._index: Dict[Tuple[int, int, str], LayoutEntry] = {
            (e.block, e.layer, e.role): e for e in self.entries
        }
        self.total = self.entries[-1].stop if self.entries else 0

    @classmethod
    def for_arch(cls, arch: NetworkArch) -> "ParamLayout":
        builder = _LayoutBuilder()
        if arch.kind == NetworkKind.PLAIN:
            builder.residual_block(INPUT_BLOCK, arch.input_dim, arch.width, arch.depth)
            builder.output(INPUT_BLOCK, arch.width, arch.output_dim)
        else:
            builder.residual_block(
                INPUT_BLOCK, arch.input_dim, arch.input_width, arch.input_depth
            )
            for p in range(1, arch.parallel_blocks + 1):
                builder.residual_block(p, arch.input_width, arch.block_width, arch.block_depth)
                builder.output(p, arch.block_width, arch.output_dim)
        return cls(builder.entries)

    def entry(self, block: int, layer: int, role: str) -> LayoutEntry:
        try:
            return self._index[(block, layer, role)]
        except KeyError:
            raise LayoutError(f"No tensor ({block}, {layer}, {role}) in layout") from None

    @property
    def blocks(self) -> List[int]:
        return sorted({e.block for e in self.entries})

    def block_indices(self, *blocks: int) -> npt.NDArray[np.intp]:
        """Flat indices of every parameter belonging to ``blocks``."""
        wanted = set(blocks)
        unknown = wanted - set(self.blocks)
        if unknown:
            raise LayoutError(f"Unknown block ids {sorted(unknown)}")
        ranges = [np.arange(e.start, e.stop) for e in self.entries if e.block in wanted]
        if not ranges:
            return np.zeros(0, dtype=np.intp)
        return np.concatenate(ranges)


class _LayoutBuilder:
    def __init__(self) -> None:
        self.entries: List[LayoutEntry] = []
        self.offset = 0

    def add(self, block: int, layer: int, role: str, shape: Tuple[int, ...], fan_in: int) -> None:
        size = int(np.prod(shape))
        self.entries.append(
            LayoutEntry(block, layer, role, self.offset, self.offset + size, shape, fan_in)
        )
        self.offset += size

    def residual_block(self, block: int, in_dim: int, width: int, depth: int) -> None:
        self.add(block, 0, "V", (width, in_dim), in_dim)
        for layer in range(1, depth + 1):
            self.add(block, layer, "W", (width, width), width)
            self.add(block, layer, "b", (width,), width)

    def output(self, block: int, width: int, out_dim: int) -> None:
        self.add(block, 0, "a", (width, out_dim), width)


def param_count(arch: NetworkArch) -> int:
    """Exact parameter count of the layout."""
    return ParamLayout.for_arch(arch).total


@dataclass(frozen=True)
class ParamVector:
    """Flat float64 parameters together with their architecture."""

    arch: NetworkArch
    values: Array = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise LayoutError(f"Parameter vector must be 1-D, got shape {values.shape}")
        expected = param_count(self.arch)
        if values.size != expected:
            raise LayoutError(
                f"Parameter vector has {values.size} entries, layout needs {expected}"
            )
        object.__setattr__(self, "values", values)

    @cached_property
    def layout(self) -> ParamLayout:
        return ParamLayout.for_arch(self.arch)

    def tensor(self, block: int, layer: int, role: str) -> Array:
        e = self.layout.entry(block, layer, role)
        return self.values[e.start:e.stop].reshape(e.shape)

    def with_values(self, values: Array) -> "ParamVector":
        return ParamVector(self.arch, np.array(values, dtype=np.float64, copy=True))

    def bind(self, tape: Tape) -> "BoundParams":
        return BoundParams(self, tape.leaf(self.values))


class BoundParams:
    """Parameters recorded as one leaf on a tape; tensors are slices of it."""

    def __init__(self, theta: ParamVector, leaf: Var):
        self.theta = theta
        self.leaf = leaf
        self._cache: Dict[Tuple[int, int, str], Var] = {}

    @property
    def arch(self) -> NetworkArch:
        return self.theta.arch

    def tensor(self, block: int, layer: int, role: str) -> Var:
        key = (block, layer, role)
        if key not in self._cache:
            e = self.theta.layout.entry(block, layer, role)
            self._cache[key] = self.leaf[e.start:e.stop].reshape(e.shape)
        return self._cache[key]


def init_params(arch: NetworkArch, seed: int) -> ParamVector:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor, deterministic in ``seed``."""
    rng = np.random.Generator(np.random.Philox(seed))
    layout = ParamLayout.for_arch(arch)
    values = np.empty(layout.total, dtype=np.float64)
    for e in layout.entries:
        bound = 1.0 / np.sqrt(e.fan_in)
        values[e.start:e.stop] = rng.uniform(-bound, bound, size=e.size)
    return ParamVector(arch, values)


def _activate(z: DualScalar, arch: NetworkArch) -> DualScalar:
    if arch.activation == Activation.TANH:
        return z.tanh()
    return z.relu_power(arch.activation_power)


def residual_stack(params: BoundParams, block: int, depth: int, x: DualScalar) -> DualScalar:
    """h0 = V x; h_l = h_{l-1} + sigma(W_l h_{l-1} + b_l). Returns h_L."""
    h = x.matmul(params.tensor(block, 0, "V").T)
    for layer in range(1, depth + 1):
        z = h.matmul(params.tensor(block, layer, "W").T) + params.tensor(block, layer, "b")
        h = h + _activate(z, params.arch)
    return h


def _input_dual(params: BoundParams, x: Sequence[DualScalar]) -> DualScalar:
    if len(x) != params.arch.input_dim:
        raise LayoutError(
            f"Network expects {params.arch.input_dim} inputs, got {len(x)}"
        )
    return stack_duals(list(x))


def _split_outputs(out: DualScalar, m: int) -> Tuple[DualScalar, ...]:
    return tuple(out[:, i] for i in range(m))


def resnet_forward(params: BoundParams, x: Sequence[DualScalar]) -> Tuple[DualScalar, ...]:
    """Plain ResNet: output a^T h_L, one dual per output component."""
    arch = params.arch
    if arch.kind != NetworkKind.PLAIN:
        raise LayoutError("resnet_forward needs a plain_resnet layout")
    h = residual_stack(params, INPUT_BLOCK, arch.depth, _input_dual(params, x))
    out = h.matmul(params.tensor(INPUT_BLOCK, 0, "a"))
    return _split_outputs(out, arch.output_dim)


def block_forward(params: BoundParams, x: Sequence[DualScalar]) -> Tuple[DualScalar, ...]:
    """Block ResNet: sum over parallel blocks fed by the input block's hidden state."""
    arch = params.arch
    if arch.kind != NetworkKind.BLOCK:
        raise LayoutError("block_forward needs a block_resnet layout")
    hidden = residual_stack(params, INPUT_BLOCK, arch.input_depth, _input_dual(params, x))
    total: Optional[DualScalar] = None
    for p in range(1, arch.parallel_blocks + 1):
        h = residual_stack(params, p, arch.block_depth, hidden)
        out = h.matmul(params.tensor(p, 0, "a"))
        total = out if total is None else total + out
    assert total is not None
    return _split_outputs(total, arch.output_dim)


def forward(params: BoundParams, x: Sequence[DualScalar]) -> Tuple[DualScalar, ...]:
    if params.arch.kind == NetworkKind.PLAIN:
        return resnet_forward(params, x)
    return block_forward(params, x)


class ConstraintMask:
    """
    Smooth closed-form field b(x, y) multiplied componentwise with the network.

    Chosen so that b vanishes where essential boundary conditions hold.
    """

    def __init__(self, name: str, components: Sequence[Expression]):
        self.name = name
        self.components = tuple(to_expr(c) for c in components)
        self._value = lambdify_vector(self.components)
        self._jacobian = lambdify_jacobian(self.components)

    def __repr__(self) -> str:
        return f"ConstraintMask({self.name!r}, {self.components})"

    def evaluate(self, points: Array) -> Tuple[Array, Array]:
        """Return b with shape (n, 2) and its Jacobian with shape (n, 2, 2)."""
        pts = np.atleast_2d(points)
        return self._value(pts), self._jacobian(pts)


def masked_field(
    params: BoundParams,
    mask: ConstraintMask,
    points: Array,
    tape: Tape,
    with_gradient: bool = True,
) -> Tuple[DualScalar, DualScalar]:
    """
    phi_i = b_i * psi_i on the tape.

    With ``with_gradient`` the duals carry d(phi_i)/dx and d(phi_i)/dy as
    tangents (product rule against the mask Jacobian).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x, y = seed_input(pts, tape, with_tangents=with_gradient)
    psi = forward(params, (x, y)[: params.arch.input_dim])
    b, jac = mask.evaluate(pts)

    if not with_gradient:
        return psi[0] * b[:, 0], psi[1] * b[:, 1]
    phi = [psi[i] * DualScalar(b[:, i], (jac[:, i, 0], jac[:, i, 1])) for i in range(2)]
    return phi[0], phi[1]


def evaluate_field(
    theta: ParamVector,
    mask: ConstraintMask,
    points: Array,
    chunk: int = 4096,
) -> Tuple[Array, Array]:
    """
    Numeric masked field: values (n, 2) and Jacobian (n, 2, 2), ``[:, i, k]``
    being d(phi_i)/d(x_k). Evaluated in chunks on throwaway tapes.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    values = np.empty((pts.shape[0], 2))
    grads = np.empty((pts.shape[0], 2, 2))
    for start in range(0, pts.shape[0], chunk):
        stop = min(start + chunk, pts.shape[0])
        tape = Tape()
        phi = masked_field(theta.bind(tape), mask, pts[start:stop], tape)
        for i, component in enumerate(phi):
            values[start:stop, i] = as_array(component.value)
            for k in range(2):
                grads[start:stop, i, k] = as_array(component.tangents[k])
    return values, grads
