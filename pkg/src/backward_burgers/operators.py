"""Stabilizing operator pair, cutoff nonlinearity, and variable diffusion.

P = A1 * Laplacian acts diagonally on the sine band (coefficient -A1 p^2 c_p);
its spectral truncation P_rho keeps exactly the modes p <= sqrt(rho_n / A1),
so P - P_rho is a pure high-mode tail.  The bounds this module guarantees are

    ||P_rho v||  <= rho_n ||v||                                (exact algebra)
    ||P v - P_rho v|| <= A1 rho_n^-gamma e^(-T rho_n) ||v||_Z  (Gevrey tail)

The Burgers nonlinearity u*u_x is made globally Lipschitz by clamping both
arguments to [-Qhat, Qhat] (``clamped``); the alternative three-case formula
keyed on max{v, vhat} is kept as ``paper_literal`` because it fails the
Lipschitz inequality on recorded witnesses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .spectral import GridFunction, SpatialGrid, SpectralCoeffs

__all__ = [
    "RegParams",
    "CutoffMode",
    "apply_P",
    "apply_P_trunc",
    "cutoff_F",
    "variable_diffusion",
]


class CutoffMode(enum.Enum):
    clamped = "clamped"
    paper_literal = "paper_literal"


def _floor_sqrt_ratio(num: float, den: float) -> int:
    """floor(sqrt(num/den)) with integer-boundary adjustment."""
    ratio = num / den
    if ratio < 1.0:
        return 0
    p = int(math.sqrt(ratio))
    while (p + 1) * (p + 1) <= ratio:
        p += 1
    while p * p > ratio:
        p -= 1
    return p


@dataclass(frozen=True)
class RegParams:
    """Regularization knobs coupling estimators, operators and solver.

    a0      upper bound assumed on A and its estimate
    a1      shift constant of the stabilizer, must exceed a0
    rhoN    spectral cutoff: modes p <= sqrt(rhoN/a1) evolve
    betaN   regression truncation
    qhatN   clamp of the nonlinearity
    kappaN  exponential time-weight rate; defaults to rhoN
    gamma   smoothness index of the Gevrey tail bound
    mu0     data smoothness index, > 1/2
    """

    a0: float
    a1: float
    rhoN: float
    betaN: float
    qhatN: float
    kappaN: float | None = None
    gamma: float = 1.0
    mu0: float = 1.0

    def __post_init__(self):
        if not 0 < self.a0 < self.a1:
            raise ValueError(f"need 0 < a0 < a1, got a0={self.a0}, a1={self.a1}")
        if not self.rhoN > 0:
            raise ValueError(f"rho_n must be positive, got {self.rhoN}")
        if not self.betaN >= 1:
            raise ValueError(f"beta_n must be >= 1, got {self.betaN}")
        if not self.qhatN > 0:
            raise ValueError(f"qhat_n must be positive, got {self.qhatN}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.mu0 > 0.5:
            raise ValueError(f"mu0 must exceed 1/2, got {self.mu0}")
        if self.kappaN is None:
            object.__setattr__(self, "kappaN", self.rhoN)

    @property
    def p_band(self) -> int:
        """Width of the evolved band: floor(sqrt(rhoN / a1)), possibly 0."""
        return _floor_sqrt_ratio(self.rhoN, self.a1)


def apply_P(c: SpectralCoeffs, rp: RegParams) -> SpectralCoeffs:
    """Apply P = a1 * Laplacian on the sine band: c_p -> -a1 p^2 c_p."""
    p = np.arange(1, c.pmax + 1, dtype=float)
    return SpectralCoeffs(pmax=c.pmax, c=-rp.a1 * p**2 * c.c)


def apply_P_trunc(c: SpectralCoeffs, rp: RegParams) -> SpectralCoeffs:
    """Band truncation of P: agrees with apply_P on p <= p_band, zero above."""
    out = np.zeros(c.pmax)
    k = min(rp.p_band, c.pmax)
    if k > 0:
        p = np.arange(1, k + 1, dtype=float)
        out[:k] = -rp.a1 * p**2 * c.c[:k]
    return SpectralCoeffs(pmax=c.pmax, c=out)


def cutoff_F(v, vhat, qhat: float, mode: CutoffMode = CutoffMode.clamped):
    """Cutoff Burgers nonlinearity; scalar in, scalar out (arrays broadcast).

    clamped        clip(v) * clip(vhat) with clip into [-qhat, qhat]; globally
                   Lipschitz with constant qhat in each argument.
    paper_literal  the three-case formula keyed on max{v, vhat}:
                   qhat^2 outside [-qhat, qhat], v*vhat inside.

    Both agree whenever |v|, |vhat| <= qhat, the only regime the convergence
    argument uses.
    """
    if not qhat > 0:
        raise ValueError(f"qhat must be positive, got {qhat}")
    v = np.asarray(v, dtype=float)
    vhat = np.asarray(vhat, dtype=float)
    if mode is CutoffMode.clamped:
        out = np.clip(v, -qhat, qhat) * np.clip(vhat, -qhat, qhat)
    elif mode is CutoffMode.paper_literal:
        m = np.maximum(v, vhat)
        out = np.where(np.abs(m) <= qhat, v * vhat, qhat**2)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown cutoff mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def variable_diffusion(u: GridFunction, aField: GridFunction, grid: SpatialGrid) -> GridFunction:
    """Conservative second-order approximation of (a(x) u_x)_x with u=0 at 0, pi.

    Fluxes a_{k+1/2} (u_{k+1} - u_k) are differenced on the midpoint grid;
    half-point coefficients are arithmetic means, one-sided at the two
    boundary half-points (which sit exactly on 0 and pi).  The Dirichlet
    condition enters through odd-reflected ghost values u_0 = -u_1,
    u_{n+1} = -u_n.
    """
    if u.grid.n != grid.n or aField.grid.n != grid.n:
        raise ValueError("u, aField and grid must share the same n")
    a = aField.values
    if np.min(a) <= 0.0:
        raise ValueError(
            f"diffusion coefficient must be strictly positive (ellipticity); min={np.min(a)}"
        )
    vals = u.values
    h = grid.h
    flux = np.empty(grid.n + 1)  # flux[k] = a_{k+1/2} (u_{k+1} - u_k), k = 0..n
    flux[1:-1] = 0.5 * (a[:-1] + a[1:]) * (vals[1:] - vals[:-1])
    flux[0] = a[0] * (vals[0] - (-vals[0]))  # ghost u_0 = -u_1
    flux[-1] = a[-1] * ((-vals[-1]) - vals[-1])  # ghost u_{n+1} = -u_n
    return GridFunction(grid=grid, values=(flux[1:] - flux[:-1]) / h**2)
