"""Manufactured problems: closed-form (u, A) with the source derived to match.

Given closed forms for the solution u(x, t) and the diffusion coefficient
A(x, t), the source is what the equation demands:

    G = u_t - (A u_x)_x - u u_x

so that u solves the forward problem exactly and H(x) = u(x, T) is exact
terminal data.  The derivation is symbolic (sympy) and everything is
lambdified to vectorized numpy callables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .noise import TimeGrid
from .spectral import GridFunction, SpatialGrid

__all__ = ["ManufacturedProblem", "manufacture"]

_X, _T = sp.symbols("x t", real=True)


def _vectorized(expr: sp.Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Lambdify an (x, t) expression so constants broadcast like fields."""
    fn = sp.lambdify((_X, _T), expr, modules="numpy")

    def call(xx, tt):
        shape = np.broadcast_shapes(np.shape(xx), np.shape(tt))
        out = np.asarray(fn(xx, tt), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out if shape else float(out)

    return call


@dataclass(frozen=True)
class ManufacturedProblem:
    """Closed-form problem instance with analytic partials and derived source."""

    name: str
    T: float
    u: Callable
    u_x: Callable
    u_t: Callable
    a: Callable
    g: Callable
    u_expr: sp.Expr
    a_expr: sp.Expr
    g_expr: sp.Expr
    a_sup: float

    def terminal(self, grid: SpatialGrid) -> GridFunction:
        """H(x) = u(x, T) sampled on the grid."""
        return GridFunction(grid=grid, values=self.u(grid.points, self.T))

    def snapshot(self, grid: SpatialGrid, t: float) -> GridFunction:
        return GridFunction(grid=grid, values=self.u(grid.points, t))

    def source_matrix(self, grid: SpatialGrid, tg: TimeGrid) -> np.ndarray:
        """G(x_k, t_j), shape (n, m+1)."""
        return self.g(grid.points[:, None], tg.nodes[None, :])

    def coeff_matrix(self, grid: SpatialGrid, tg: TimeGrid) -> np.ndarray:
        """A(x_k, t_j), shape (n, m+1)."""
        return self.a(grid.points[:, None], tg.nodes[None, :])


def manufacture(
    uSpec, aSpec, T: float, name: str = "manufactured", include_nonlinearity: bool = True
) -> ManufacturedProblem:
    """Derive the source so that (u, A, G) satisfies the forward equation exactly.

    Parameters
    ----------
    uSpec, aSpec : sympy expression or string in the symbols x, t
        Closed forms of the solution and the diffusion coefficient.  u must
        vanish at x = 0 and x = pi for all t; A must be strictly positive.
    T : float
        Final time; H(x) = u(x, T).
    include_nonlinearity : bool
        When False the source is derived for the linear equation
        u_t - (A u_x)_x = G instead; pairs with the solvers' test hook that
        disables the Burgers term.

    Raises
    ------
    ValueError
        If the boundary condition or the ellipticity of A fails (checked
        symbolically where possible, then by dense sampling).
    """
    if not T > 0:
        raise ValueError(f"final time must be positive, got T={T}")
    u_expr = sp.sympify(uSpec, locals={"x": _X, "t": _T})
    a_expr = sp.sympify(aSpec, locals={"x": _X, "t": _T})

    for endpoint in (sp.Integer(0), sp.pi):
        trace = sp.simplify(u_expr.subs(_X, endpoint))
        if trace != 0:
            # symbolic simplification can be inconclusive; fall back to sampling
            f = sp.lambdify(_T, trace, modules="numpy")
            ts = np.linspace(0.0, T, 257)
            if np.max(np.abs(np.asarray(f(ts), dtype=float))) > 1e-12:
                raise ValueError(
                    f"u does not satisfy the Dirichlet condition at x={endpoint}: trace {trace}"
                )

    u_x = sp.diff(u_expr, _X)
    u_t = sp.diff(u_expr, _T)
    g_expr = u_t - sp.diff(a_expr * u_x, _X)
    if include_nonlinearity:
        g_expr = g_expr - u_expr * u_x
    g_expr = sp.expand(g_expr)

    problem = ManufacturedProblem(
        name=name,
        T=float(T),
        u=_vectorized(u_expr),
        u_x=_vectorized(u_x),
        u_t=_vectorized(u_t),
        a=_vectorized(a_expr),
        g=_vectorized(g_expr),
        u_expr=u_expr,
        a_expr=a_expr,
        g_expr=g_expr,
        a_sup=0.0,
    )

    xs = np.linspace(0.0, np.pi, 201)
    ts = np.linspace(0.0, T, 101)
    avals = problem.a(xs[:, None], ts[None, :])
    if np.min(avals) <= 0.0:
        raise ValueError(f"diffusion coefficient is not elliptic: min sampled A = {np.min(avals)}")
    object.__setattr__(problem, "a_sup", float(np.max(avals)))
    return problem
