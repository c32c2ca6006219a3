"""Truncated sine-series regression estimators and their theoretical MSE order.

The estimator of a function from noisy midpoint samples is simply the discrete
sine transform truncated at pcut = floor(sqrt(beta_n)); time-dependent fields
are estimated column-wise per time node.  The MSE of the static estimator is
measured in coefficient space (Parseval), as the band error plus the exact
tail energy of the known truth, which keeps quadrature error out of the
statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .noise import NoiseConfig, TimeGrid, stream
from .spectral import (
    GridFunction,
    SpatialGrid,
    SpectralCoeffs,
    analyze,
    basis_matrix,
    make_grid,
    _readonly,
)

__all__ = [
    "TruncationSet",
    "TimeField",
    "estimate_static",
    "estimate_time_field",
    "theoretical_mse_order",
    "empirical_mse",
]


def _floor_sqrt(v: float) -> int:
    """Largest integer p with p*p <= v, robust to float sqrt rounding."""
    if v < 1.0:
        return 0
    p = int(math.isqrt(int(v))) if float(v).is_integer() else int(math.sqrt(v))
    while (p + 1) * (p + 1) <= v:
        p += 1
    while p * p > v:
        p -= 1
    return p


@dataclass(frozen=True)
class TruncationSet:
    """Regression band {p : p <= sqrt(beta_n)}; pcut = floor(sqrt(beta_n))."""

    betaN: float

    def __post_init__(self):
        if not self.betaN >= 1.0:
            raise ValueError(f"beta_n must be >= 1 so the band is nonempty, got {self.betaN}")

    @property
    def pcut(self) -> int:
        return _floor_sqrt(self.betaN)


@dataclass(frozen=True)
class TimeField:
    """One coefficient vector per time node, uniform band width."""

    timegrid: TimeGrid
    coeffs: np.ndarray  # shape (m+1, pmax)

    def __post_init__(self):
        c = _readonly(self.coeffs)
        if c.ndim != 2 or c.shape[0] != self.timegrid.m + 1:
            raise ValueError(
                f"expected (m+1, pmax) coefficients with m+1={self.timegrid.m + 1}, got {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("time field contains non-finite coefficients")
        object.__setattr__(self, "coeffs", c)

    @property
    def pmax(self) -> int:
        return self.coeffs.shape[1]

    def node(self, j: int) -> SpectralCoeffs:
        return SpectralCoeffs(pmax=self.pmax, c=self.coeffs[j])

    def values_on_grid(self, grid: SpatialGrid) -> np.ndarray:
        """Synthesize every node onto the grid; shape (m+1, n)."""
        psi = basis_matrix(grid, self.pmax)
        return self.coeffs @ psi.T


def estimate_static(samples: GridFunction, ts: TruncationSet) -> SpectralCoeffs:
    """Series estimator of a static function: the quadrature transform cut at pcut."""
    pcut = ts.pcut
    n = samples.grid.n
    if pcut > n - 1:
        raise ValueError(
            f"truncation pcut={pcut} reaches past the grid's alias-free band "
            f"p <= n-1 = {n - 1}; enlarge n or shrink beta_n"
        )
    return analyze(samples, pcut)


def estimate_time_field(paths: np.ndarray, tg: TimeGrid, ts: TruncationSet) -> TimeField:
    """Column-wise static estimation of an (n, m+1) path matrix.

    The row index is tied to the midpoint grid of size n, which is where the
    observation model lives.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 2 or paths.shape[1] != tg.m + 1:
        raise ValueError(f"paths must be (n, m+1) with m+1={tg.m + 1}, got {paths.shape}")
    n = paths.shape[0]
    pcut = ts.pcut
    if pcut > n - 1:
        raise ValueError(
            f"truncation pcut={pcut} reaches past the grid's alias-free band p <= n-1 = {n - 1}"
        )
    grid = make_grid(n)
    psi = basis_matrix(grid, pcut)
    coeffs = (math.pi / n) * (paths.T @ psi)  # (m+1, pcut)
    return TimeField(timegrid=tg, coeffs=coeffs)


def theoretical_mse_order(n: int, betaN: float, mu0: float) -> float:
    """Reference MSE order max(sqrt(beta_n) n^(-4 mu0), beta_n^(-mu0)).

    Used only to draw reference slopes, never as a pass/fail number.
    """
    if not mu0 > 0.5:
        raise ValueError(f"mu0 must exceed 1/2, got {mu0}")
    if n < 1 or betaN <= 0:
        raise ValueError("need n >= 1 and beta_n > 0")
    return max(math.sqrt(betaN) * float(n) ** (-4.0 * mu0), betaN ** (-mu0))


def empirical_mse(
    truth: GridFunction,
    truth_coeffs: np.ndarray,
    ts: TruncationSet,
    cfg: NoiseConfig,
    trials: int,
    tail_energy: float = 0.0,
) -> float:
    """Monte-Carlo mean of the squared L2 estimation error.

    Each trial perturbs the truth samples with sigma_k eps_k (trial t uses the
    Philox stream keyed (cfg.seed, t)), estimates, and accumulates

        sum_{p <= pcut} (chat_p - c_p)^2  +  sum_{p > pcut} c_p^2

    where the second part is the exact tail of the known truth: the entries of
    ``truth_coeffs`` beyond pcut plus ``tail_energy`` for everything beyond the
    provided band.  Trials are reduced in index order, so the result is a pure
    function of (inputs, seed).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    truth_coeffs = np.asarray(truth_coeffs, dtype=float)
    pcut = ts.pcut
    if truth_coeffs.shape[0] < pcut:
        raise ValueError(
            f"need the true coefficients at least through pcut={pcut}, "
            f"got {truth_coeffs.shape[0]}"
        )
    n = truth.grid.n
    if pcut > n - 1:
        raise ValueError(f"truncation pcut={pcut} reaches past the alias-free band p <= {n - 1}")
    psi = basis_matrix(truth.grid, pcut)
    band_truth = truth_coeffs[:pcut]
    extra = float(np.sum(truth_coeffs[pcut:] ** 2)) + float(tail_energy)
    w = math.pi / n
    total = 0.0
    for t in range(trials):
        rng = stream(cfg.seed, t)
        noisy = truth.values + cfg.sigma * rng.standard_normal(n)
        chat = w * (psi.T @ noisy)
        total += float(np.sum((chat - band_truth) ** 2)) + extra
    return total / trials
