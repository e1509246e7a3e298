"""
Closed-form fields via sympy, evaluated on numpy point batches.
"""

from typing import Callable, Sequence, Union

import numpy as np
import numpy.typing as npt
import sympy

X, Y = sympy.symbols("x y", real=True)

Expression = Union[sympy.Expr, str, float, int]
PointFunction = Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]


def to_expr(expr: Expression) -> sympy.Expr:
    """Parse strings in terms of ``x`` and ``y``; pass sympy expressions through."""
    if isinstance(expr, str):
        return sympy.sympify(expr, locals={"x": X, "y": Y})
    return sympy.sympify(expr)


def lambdify_scalar(expr: Expression) -> PointFunction:
    """Compile ``expr(x, y)`` to a function of an ``(n, 2)`` point array."""
    compiled = sympy.lambdify((X, Y), to_expr(expr), modules="numpy")

    def evaluate(points: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        pts = np.atleast_2d(points)
        out = compiled(pts[:, 0], pts[:, 1])
        # constant expressions come back as scalars
        return np.broadcast_to(np.asarray(out, dtype=np.float64), pts.shape[:1]).copy()

    return evaluate


def gradient_exprs(expr: Expression) -> tuple[sympy.Expr, sympy.Expr]:
    e = to_expr(expr)
    return sympy.diff(e, X), sympy.diff(e, Y)


def lambdify_vector(exprs: Sequence[Expression]) -> PointFunction:
    """Compile a vector field to a function returning ``(n, len(exprs))``."""
    parts = [lambdify_scalar(e) for e in exprs]

    def evaluate(points: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return np.stack([part(points) for part in parts], axis=-1)

    return evaluate


def lambdify_jacobian(exprs: Sequence[Expression]) -> PointFunction:
    """Compile the Jacobian; result ``[:, i, k]`` is d(expr_i)/d(x_k)."""
    rows = [[lambdify_scalar(d) for d in gradient_exprs(e)] for e in exprs]

    def evaluate(points: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return np.stack(
            [np.stack([entry(points) for entry in row], axis=-1) for row in rows],
            axis=1,
        )

    return evaluate
