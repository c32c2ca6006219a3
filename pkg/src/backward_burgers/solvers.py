"""Forward cross-check solver and the regularized terminal-value solver.

The regularized problem is integrated in reversed time tau = T - t.  With the
shifted coefficient B_bar = A1 - Ahat (>= A1 - A0 > 0 after clipping Ahat at
A0) the evolution reads

    dU/dtau = (B_bar U_x)_x - P_rho U - F_Qhat(U, U_x) - Ghat(., T - tau),

which is parabolic in tau: the elliptic term is advanced implicitly (one
tridiagonal solve per step, coefficient frozen at the step midpoint's nearest
observation node), while -P_rho U (bounded amplification <= rho_n), the
clamped nonlinearity, and the source are advanced explicitly, sub-stepping so
that dtau * rho_n <= c_stab.  In-band modes therefore amplify like the true
backward dynamics while everything above the band is damped by the B_bar
diffusion; that trade is the whole point of the regularization.

The forward solver only cross-checks manufactured problems; it uses
Crank-Nicolson diffusion with a Heun-style IMEX predictor-corrector for the
source and nonlinearity (second order in time).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .manufactured import ManufacturedProblem
from .noise import TimeGrid
from .operators import CutoffMode, RegParams, cutoff_F
from .regression import TimeField
from .spectral import (
    GridFunction,
    SpatialGrid,
    SpectralCoeffs,
    basis_matrix,
    synthesize,
)

__all__ = ["TrajectorySolution", "forward_solve", "backward_solve_regularized", "error_at"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrajectorySolution:
    """Grid snapshots U(., t_j), j = 0..m, indexed forward in t."""

    timegrid: TimeGrid
    states: tuple

    def __post_init__(self):
        if len(self.states) != self.timegrid.m + 1:
            raise ValueError(
                f"expected {self.timegrid.m + 1} snapshots, got {len(self.states)}"
            )
        object.__setattr__(self, "states", tuple(self.states))

    def values_matrix(self) -> np.ndarray:
        """(m+1, n) matrix of snapshot values."""
        return np.stack([s.values for s in self.states])


def _half_point(b: np.ndarray) -> np.ndarray:
    """Half-point coefficients: arithmetic means, one-sided at the boundary."""
    bh = np.empty(b.shape[0] + 1)
    bh[1:-1] = 0.5 * (b[:-1] + b[1:])
    bh[0] = b[0]
    bh[-1] = b[-1]
    return bh


def _apply_diffusion(b: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """(b u_x)_x by conservative fluxes, Dirichlet ghosts u_0=-u_1, u_{n+1}=-u_n."""
    bh = _half_point(b)
    flux = np.empty(u.shape[0] + 1)
    flux[1:-1] = bh[1:-1] * (u[1:] - u[:-1])
    flux[0] = 2.0 * bh[0] * u[0]
    flux[-1] = -2.0 * bh[-1] * u[-1]
    return (flux[1:] - flux[:-1]) / h**2


def _banded_implicit(b: np.ndarray, h: float, coef: float) -> np.ndarray:
    """Banded form of (I - coef * L_b) for scipy.linalg.solve_banded((1, 1), ...)."""
    n = b.shape[0]
    bh = _half_point(b)
    scale = coef / h**2
    main = 1.0 + scale * (bh[:-1] + bh[1:])
    main[0] = 1.0 + scale * (2.0 * bh[0] + bh[1])
    main[-1] = 1.0 + scale * (bh[-2] + 2.0 * bh[-1])
    ab = np.zeros((3, n))
    ab[0, 1:] = -scale * bh[1:-1]  # superdiagonal
    ab[1, :] = main
    ab[2, :-1] = -scale * bh[1:-1]  # subdiagonal
    return ab


def _abort_nonfinite(tau: float, T: float):
    raise RuntimeError(
        f"backward solve produced non-finite state at tau={tau:.6g} (t={T - tau:.6g})"
    )


def _gradient(u: np.ndarray, h: float) -> np.ndarray:
    """Centered u_x with the same odd-reflected ghosts as the diffusion."""
    ux = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    ux[0] = (u[1] + u[0]) / (2.0 * h)
    ux[-1] = (-u[-1] - u[-2]) / (2.0 * h)
    return ux


def forward_solve(
    problem: ManufacturedProblem,
    grid: SpatialGrid,
    tg: TimeGrid,
    nonlinearity: bool = True,
    stability_factor: float = 10.0,
) -> TrajectorySolution:
    """Integrate u_t = (A u_x)_x + u u_x + G forward from u(., 0).

    Exists to cross-check ``manufacture``: the terminal snapshot must land on
    H within discretization error.  Aborts with a diagnostic if the discrete
    norm grows past ``stability_factor`` times the data scale.
    """
    x = grid.points
    h = grid.h
    u = problem.u(x, 0.0)
    dt = tg.dt

    gmax = float(np.max(np.abs(problem.source_matrix(grid, tg)))) if tg.m else 0.0
    scale = float(np.max(np.abs(u))) + tg.T * gmax + 1e-12
    limit = stability_factor * scale
    # explicit advection CFL on the IMEX split
    s = max(1, int(math.ceil(dt * scale / (0.4 * h))))
    delta = dt / s

    def explicit(v: np.ndarray, t: float) -> np.ndarray:
        rhs = problem.g(x, t)
        if nonlinearity:
            rhs = rhs + v * _gradient(v, h)
        return rhs

    states = [GridFunction(grid=grid, values=u.copy())]
    t = 0.0
    for _ in range(tg.m):
        for _ in range(s):
            a_now = problem.a(x, t)
            a_next = problem.a(x, t + delta)
            e_now = explicit(u, t)
            ab_pred = _banded_implicit(a_next, h, delta)
            u_pred = solve_banded((1, 1), ab_pred, u + delta * e_now)
            ab_corr = _banded_implicit(a_next, h, 0.5 * delta)
            rhs = (
                u
                + 0.5 * delta * _apply_diffusion(a_now, u, h)
                + 0.5 * delta * (e_now + explicit(u_pred, t + delta))
            )
            u = solve_banded((1, 1), ab_corr, rhs)
            t += delta
            if not np.all(np.isfinite(u)):
                raise RuntimeError(f"forward solve produced non-finite state at t={t:.6g}")
        norm = math.sqrt((math.pi / grid.n) * float(np.sum(u**2)))
        if norm > limit:
            raise RuntimeError(
                f"forward solve unstable at t={t:.6g}: norm {norm:.3e} exceeds {limit:.3e}"
            )
        states.append(GridFunction(grid=grid, values=u.copy()))
    return TrajectorySolution(timegrid=tg, states=tuple(states))


def backward_solve_regularized(
    hhat: SpectralCoeffs,
    ghat: TimeField,
    ahat: TimeField,
    rp: RegParams,
    grid: SpatialGrid,
    tg: TimeGrid,
    nonlinearity: bool = True,
    cutoff_mode: CutoffMode = CutoffMode.clamped,
    c_stab: float = 0.5,
    scheme: str = "be",
) -> TrajectorySolution:
    """Solve the regularized terminal-value problem back from t = T to t = 0.

    Parameters
    ----------
    hhat : SpectralCoeffs
        Estimated terminal data; becomes the state at tau = 0.
    ghat, ahat : TimeField
        Estimated source and diffusion coefficient, piecewise-constant in time
        at the observation nodes (Brownian paths are nowhere smoother).
    rp : RegParams
        Couples the spectral cutoff rho_n, the clamp qhat_n and the shift a1.
    scheme : str
        "be" (default, normative): backward Euler diffusion, forward Euler on
        the explicit terms.  "imex2": Crank-Nicolson diffusion with a
        Heun-style predictor-corrector on the explicit terms, second order in
        time; the split (implicit stiff half, explicit bounded half) is the
        same.

    Returns
    -------
    TrajectorySolution
        Snapshots reindexed to forward time, states[j] ~ U(., t_j).
    """
    if ghat.timegrid.m != tg.m or ahat.timegrid.m != tg.m:
        raise ValueError("ghat and ahat must live on the solver's time grid")
    if scheme not in ("be", "imex2"):
        raise ValueError(f"unknown time scheme {scheme!r}; use 'be' or 'imex2'")
    h = grid.h
    n = grid.n
    T = tg.T
    dtau = tg.dt

    avals = ahat.values_on_grid(grid)
    overshoot = int(np.sum(avals > rp.a0))
    if overshoot:
        # estimator noise can push Ahat past the assumed bound; the analysis
        # needs Ahat <= a0 < a1, so clip and say so
        logger.warning(
            "clipping %d of %d Ahat samples exceeding a0=%g", overshoot, avals.size, rp.a0
        )
        avals = np.minimum(avals, rp.a0)
    bvals = rp.a1 - avals  # >= a1 - a0 > 0
    gvals = ghat.values_on_grid(grid)

    band = min(rp.p_band, n - 1)  # the grid resolves nothing above p = n-1
    if band > 0:
        psi_band = basis_matrix(grid, band)
        amp_w = rp.a1 * np.arange(1, band + 1, dtype=float) ** 2 * (math.pi / n)

    def explicit(v: np.ndarray, node: int) -> np.ndarray:
        rhs = -gvals[node]
        if band > 0:
            rhs = rhs + psi_band @ (amp_w * (psi_band.T @ v))  # = -P_rho v
        if nonlinearity:
            rhs = rhs - cutoff_F(v, _gradient(v, h), rp.qhatN, cutoff_mode)
        return rhs

    u = synthesize(hhat, grid).values.copy()
    substeps = max(1, int(math.ceil(dtau * rp.rhoN / c_stab)))
    delta = dtau / substeps

    states_tau = [u.copy()]
    tau = 0.0
    for _ in range(tg.m):
        for _ in range(substeps):
            t_mid = T - (tau + 0.5 * delta)
            node = min(max(int(round(t_mid / dtau)), 0), tg.m)
            b = bvals[node]
            e_now = explicit(u, node)
            if scheme == "be":
                ab = _banded_implicit(b, h, delta)
                rhs = u + delta * e_now
                if not np.all(np.isfinite(rhs)):
                    _abort_nonfinite(tau, T)
                u = solve_banded((1, 1), ab, rhs)
            else:  # imex2
                ab_pred = _banded_implicit(b, h, delta)
                rhs = u + delta * e_now
                if not np.all(np.isfinite(rhs)):
                    _abort_nonfinite(tau, T)
                u_pred = solve_banded((1, 1), ab_pred, rhs)
                ab_corr = _banded_implicit(b, h, 0.5 * delta)
                rhs = (
                    u
                    + 0.5 * delta * _apply_diffusion(b, u, h)
                    + 0.5 * delta * (e_now + explicit(u_pred, node))
                )
                if not np.all(np.isfinite(rhs)):
                    _abort_nonfinite(tau, T)
                u = solve_banded((1, 1), ab_corr, rhs)
            tau += delta
            if not np.all(np.isfinite(u)):
                _abort_nonfinite(tau, T)
        states_tau.append(u.copy())

    states = tuple(
        GridFunction(grid=grid, values=states_tau[tg.m - j]) for j in range(tg.m + 1)
    )
    return TrajectorySolution(timegrid=tg, states=states)


def error_at(t: float, sol: TrajectorySolution, truth: ManufacturedProblem) -> float:
    """Discrete L2 distance between the solution and the truth at the node nearest t."""
    tg = sol.timegrid
    if t < 0.0 or t > tg.T * (1.0 + 1e-12):
        raise ValueError(f"t={t} lies outside [0, {tg.T}]")
    j = min(max(int(round(t / tg.dt)), 0), tg.m)
    state = sol.states[j]
    diff = state.values - truth.u(state.grid.points, tg.nodes[j])
    return float(np.sqrt((math.pi / state.grid.n) * np.sum(diff**2)))
