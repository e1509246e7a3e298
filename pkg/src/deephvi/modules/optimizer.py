"""
Adam with optional restriction of the update to a subset of parameters.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from ..config import AdamSettings
from ..exceptions import ContractViolation
from .autodiff import GradVector
from .network import ParamVector

IndexSet = npt.NDArray[np.intp]


@dataclass(frozen=True)
class AdamState:
    """Moments and the step counter shared by every parameter."""

    m: npt.NDArray[np.float64] = field(repr=False)
    v: npt.NDArray[np.float64] = field(repr=False)
    t: int = 0
    settings: AdamSettings = AdamSettings()

    @classmethod
    def zeros(cls, size: int, settings: Optional[AdamSettings] = None) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, settings or AdamSettings())


def adam_step(
    state: AdamState,
    theta: ParamVector,
    grad: GradVector,
    active: Optional[IndexSet] = None,
) -> Tuple[AdamState, ParamVector]:
    """
    One Adam update.

    Only ``active`` entries (all when None) move; their moments are updated and
    the others keep both their values and their moments. Bias correction uses
    the global counter t + 1.
    """
    g = np.asarray(grad, dtype=np.float64)
    n = theta.values.size
    if g.shape != (n,) or state.m.shape != (n,) or state.v.shape != (n,):
        raise ContractViolation(
            f"Gradient/moment lengths {g.shape}, {state.m.shape}, {state.v.shape} "
            f"do not match {n} parameters"
        )
    idx = np.arange(n) if active is None else np.asarray(active, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ContractViolation("Active index set exceeds the parameter vector")

    s = state.settings
    t = state.t + 1
    m = state.m.copy()
    v = state.v.copy()
    values = theta.values.copy()

    m[idx] = s.beta1 * m[idx] + (1.0 - s.beta1) * g[idx]
    v[idx] = s.beta2 * v[idx] + (1.0 - s.beta2) * g[idx] ** 2
    m_hat = m[idx] / (1.0 - s.beta1**t)
    v_hat = v[idx] / (1.0 - s.beta2**t)
    values[idx] -= s.lr * m_hat / (np.sqrt(v_hat) + s.eps)

    return AdamState(m, v, t, s), theta.with_values(values)
