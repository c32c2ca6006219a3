"""Sine basis on (0, pi), midpoint sampling grid, and the norms built on it.

The eigenfunctions psi_p(x) = sqrt(2/pi) * sin(p*x) of the Dirichlet Laplacian
(eigenvalues lambda_p = p^2) are sampled on the midpoint grid
x_k = pi*(2k-1)/(2n), k = 1..n, on which the rectangle-rule quadrature
(pi/n) * sum_k psi_p(x_k) psi_q(x_k) is exactly orthonormal for p, q <= n-1.
Mode p = n is degenerate on this grid (its discrete squared norm is 2), so the
resolvable band is p <= n-1 and ``analyze`` rejects anything wider than n.

All containers are frozen dataclasses holding read-only arrays; every function
here is pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dst

__all__ = [
    "SpatialGrid",
    "GridFunction",
    "SpectralCoeffs",
    "SmoothnessParams",
    "make_grid",
    "basis_eval",
    "basis_matrix",
    "analyze",
    "synthesize",
    "sobolev_norm",
    "gevrey_norm",
    "grid_norm",
]

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SpatialGrid:
    """Midpoint sample grid x_k = pi*(2k-1)/(2n), k = 1..n."""

    n: int
    points: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"grid needs at least one point, got n={self.n}")
        pts = _readonly(self.points)
        if pts.shape != (self.n,):
            raise ValueError(f"expected {self.n} points, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)

    @property
    def h(self) -> float:
        """Uniform spacing pi/n (also the quadrature weight up to a factor)."""
        return math.pi / self.n


@dataclass(frozen=True)
class GridFunction:
    """Real-valued samples on a :class:`SpatialGrid`."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError(
                f"values shape {vals.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function contains non-finite samples")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Finite sine-series coefficients c[p-1] of psi_p, p = 1..pmax."""

    pmax: int
    c: np.ndarray

    def __post_init__(self):
        if self.pmax < 1:
            raise ValueError(f"pmax must be positive, got {self.pmax}")
        c = _readonly(self.c)
        if c.shape != (self.pmax,):
            raise ValueError(f"coefficient shape {c.shape} does not match pmax={self.pmax}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients contain non-finite entries")
        object.__setattr__(self, "c", c)

    def l2_norm(self) -> float:
        """Parseval L2 norm sqrt(sum c_p^2)."""
        return float(np.linalg.norm(self.c))


@dataclass(frozen=True)
class SmoothnessParams:
    """Weights of the Gevrey-type norm: power index gamma, exponential index bigB."""

    gamma: float
    bigB: float

    def __post_init__(self):
        if self.gamma < 0 or self.bigB < 0:
            raise ValueError("smoothness weights must be nonnegative")


def make_grid(n: int) -> SpatialGrid:
    """Build the n-point midpoint grid on (0, pi).

    Parameters
    ----------
    n : int
        Number of samples, n >= 1.

    Returns
    -------
    SpatialGrid
        Points pi*(2k-1)/(2n), strictly increasing and symmetric about pi/2.
    """
    if n < 1:
        raise ValueError(f"grid needs at least one point, got n={n}")
    k = np.arange(1, n + 1, dtype=float)
    return SpatialGrid(n=n, points=np.pi * (2.0 * k - 1.0) / (2.0 * n))


def basis_eval(p: int, x):
    """Evaluate psi_p(x) = sqrt(2/pi) * sin(p*x); x may be scalar or array."""
    if p < 1:
        raise ValueError(f"mode index must be >= 1, got {p}")
    return _SQRT_2_OVER_PI * np.sin(p * np.asarray(x, dtype=float))


def basis_matrix(grid: SpatialGrid, pmax: int) -> np.ndarray:
    """Matrix Psi[k, p-1] = psi_p(x_k), shape (n, pmax)."""
    if pmax < 1:
        raise ValueError(f"pmax must be positive, got {pmax}")
    p = np.arange(1, pmax + 1, dtype=float)
    return _SQRT_2_OVER_PI * np.sin(np.outer(grid.points, p))


def analyze(f: GridFunction, pmax: int, use_fft: bool = False) -> SpectralCoeffs:
    """Discrete sine transform: c_p = (pi/n) * sum_k f(x_k) psi_p(x_k).

    The direct quadrature sum is the normative definition; ``use_fft`` routes
    through a DST-II, which is algebraically identical on the midpoint grid.

    Parameters
    ----------
    f : GridFunction
        Samples on the midpoint grid.
    pmax : int
        Width of the coefficient band; must satisfy pmax <= n (mode n is
        degenerate on the grid, everything above aliases).
    """
    n = f.grid.n
    if pmax > n:
        raise ValueError(
            f"pmax={pmax} exceeds the grid's resolvable band: the midpoint grid "
            f"with n={n} samples aliases every mode above p=n"
        )
    if use_fft:
        # DST-II: y[p-1] = 2 sum_j f_j sin(p * x_j) on exactly this grid.
        y = dst(f.values, type=2)
        c = (math.sqrt(2.0 * math.pi) / (2.0 * n)) * y[:pmax]
        return SpectralCoeffs(pmax=pmax, c=c)
    psi = basis_matrix(f.grid, pmax)
    c = (math.pi / n) * (psi.T @ f.values)
    return SpectralCoeffs(pmax=pmax, c=c)


def synthesize(c: SpectralCoeffs, grid: SpatialGrid, use_fft: bool = False) -> GridFunction:
    """Evaluate the finite series sum_p c_p psi_p on the grid."""
    if use_fft and c.pmax <= grid.n:
        # DST-III is the inverse kernel; its last input carries weight 1, not 2.
        padded = np.zeros(grid.n)
        padded[: c.pmax] = c.c
        padded[-1] *= 2.0
        vals = 0.5 * _SQRT_2_OVER_PI * dst(padded, type=3)
        return GridFunction(grid=grid, values=vals)
    psi = basis_matrix(grid, c.pmax)
    return GridFunction(grid=grid, values=psi @ c.c)


def sobolev_norm(c: SpectralCoeffs, gamma: float) -> float:
    """Spectral Sobolev norm sqrt(sum_p p^(4*gamma) c_p^2), lambda_p = p^2."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    p = np.arange(1, c.pmax + 1, dtype=float)
    return float(np.sqrt(np.sum(p ** (4.0 * gamma) * c.c**2)))


def gevrey_norm(c: SpectralCoeffs, s: SmoothnessParams) -> float:
    """Gevrey-type norm sqrt(sum_p p^(2+2*gamma) e^(2*B*p^2) c_p^2).

    The exponential weight overflows double precision near p ~ 27 for B = 1,
    so the sum is accumulated in log space; an overflowing result is reported
    as math.inf rather than raised.
    """
    nz = c.c != 0.0
    if not np.any(nz):
        return 0.0
    p = np.arange(1, c.pmax + 1, dtype=float)[nz]
    log_terms = (
        (2.0 + 2.0 * s.gamma) * np.log(p)
        + 2.0 * s.bigB * p**2
        + 2.0 * np.log(np.abs(c.c[nz]))
    )
    m = float(np.max(log_terms))
    log_sum = m + math.log(float(np.sum(np.exp(log_terms - m))))
    if log_sum / 2.0 > 709.0:  # exp overflow threshold for float64
        return math.inf
    return math.exp(log_sum / 2.0)


def grid_norm(f: GridFunction) -> float:
    """Discrete L2 norm sqrt((pi/n) * sum_k f(x_k)^2)."""
    return float(np.sqrt((math.pi / f.grid.n) * np.sum(f.values**2)))
