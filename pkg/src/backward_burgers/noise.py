"""Observation model: Gaussian errors on terminal data, Brownian paths on fields.

Randomness comes from numpy's Philox4x64-10 counter-based generator so that
per-trial streams are independent and bit-reproducible: a stream is keyed by
``SeedSequence([seed, *keys])`` and the draw order inside :func:`observe` is
fixed (terminal errors first, then source increments, then coefficient
increments).  Identical inputs and seed therefore give bit-identical output on
any platform running the same numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import GridFunction, _readonly

__all__ = [
    "TimeGrid",
    "NoiseConfig",
    "BrownianPath",
    "NoisyObservations",
    "stream",
    "sample_gaussian_errors",
    "sample_brownian_paths",
    "observe",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes t_j = j*T/m, j = 0..m."""

    m: int
    T: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"need at least one time interval, got m={self.m}")
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got T={self.T}")

    @property
    def dt(self) -> float:
        return self.T / self.m

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.m + 1)


@dataclass(frozen=True)
class NoiseConfig:
    """Amplitudes and seed of the observation noise.

    sigma       per-point std-dev bounds of the terminal-data errors (length n)
    vartheta    Brownian amplitude on the source paths
    varthetabar Brownian amplitude on the diffusion-coefficient paths
    vmax        common upper bound on all amplitudes
    seed        base seed of the Philox stream
    shared_noise reuse the source Brownian family for the coefficient paths;
                 the default keeps the two families mutually independent
    """

    sigma: np.ndarray
    vartheta: float
    varthetabar: float
    vmax: float
    seed: int
    shared_noise: bool = field(default=False)

    def __post_init__(self):
        sig = _readonly(np.atleast_1d(self.sigma))
        if sig.ndim != 1:
            raise ValueError("sigma must be a vector")
        if np.any(sig < 0) or np.any(sig >= self.vmax):
            raise ValueError("need 0 <= sigma_k < vmax for every k")
        if self.vartheta < 0 or self.varthetabar < 0:
            raise ValueError("noise amplitudes must be nonnegative")
        object.__setattr__(self, "sigma", sig)


@dataclass(frozen=True)
class BrownianPath:
    """Standard Brownian path sampled at the nodes of a TimeGrid; w[0] = 0."""

    timegrid: TimeGrid
    w: np.ndarray

    def __post_init__(self):
        w = _readonly(self.w)
        if w.shape != (self.timegrid.m + 1,):
            raise ValueError(f"path length {w.shape} does not match m+1={self.timegrid.m + 1}")
        if w[0] != 0.0:
            raise ValueError("Brownian path must start at zero")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class NoisyObservations:
    """Perturbed terminal data plus source and coefficient paths."""

    hTilde: GridFunction
    gTilde: np.ndarray  # shape (n, m+1)
    aTilde: np.ndarray  # shape (n, m+1)

    def __post_init__(self):
        n = self.hTilde.grid.n
        g = _readonly(self.gTilde)
        a = _readonly(self.aTilde)
        if g.ndim != 2 or a.shape != g.shape or g.shape[0] != n:
            raise ValueError(
                f"path matrices must both be (n, m+1) with n={n}; got {g.shape} and {a.shape}"
            )
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(a))):
            raise ValueError("observations contain non-finite entries")
        object.__setattr__(self, "gTilde", g)
        object.__setattr__(self, "aTilde", a)


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator keyed by (seed, *keys); independent across key tuples."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))


def sample_gaussian_errors(n: int, cfg: NoiseConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw (sigma_1 eps_1, ..., sigma_n eps_n) with eps_k iid standard normal.

    Deterministic given cfg.seed when no generator is passed in.
    """
    if cfg.sigma.shape != (n,):
        raise ValueError(f"sigma has length {cfg.sigma.shape[0]}, expected {n}")
    if rng is None:
        rng = stream(cfg.seed)
    return cfg.sigma * rng.standard_normal(n)


def sample_brownian_paths(
    count: int, tg: TimeGrid, cfg: NoiseConfig, rng: np.random.Generator | None = None
) -> list[BrownianPath]:
    """Draw ``count`` mutually independent standard Brownian paths on tg.

    Increments are N(0, dt); amplitudes (vartheta etc.) are applied by the
    consumer, the paths themselves are standard.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if rng is None:
        rng = stream(cfg.seed)
    w = _increment_matrix(count, tg, rng)
    return [BrownianPath(timegrid=tg, w=row) for row in w]


def _increment_matrix(count: int, tg: TimeGrid, rng: np.random.Generator) -> np.ndarray:
    """(count, m+1) matrix of standard Brownian paths, w[:, 0] = 0."""
    dw = rng.standard_normal((count, tg.m)) * np.sqrt(tg.dt)
    w = np.zeros((count, tg.m + 1))
    np.cumsum(dw, axis=1, out=w[:, 1:])
    return w


def observe(
    truthH: GridFunction,
    truthG: np.ndarray,
    truthA: np.ndarray,
    tg: TimeGrid,
    cfg: NoiseConfig,
) -> NoisyObservations:
    """Apply the observation model to exact terminal data and field samples.

    hTilde(x_k)   = H(x_k) + sigma_k eps_k
    gTilde[k, j]  = G(x_k, t_j) + vartheta * xi_k(t_j)
    aTilde[k, j]  = A(x_k, t_j) + varthetabar * xi'_k(t_j)

    with eps iid N(0,1) and xi, xi' independent standard Brownian families
    (xi' == xi when cfg.shared_noise).  Bit-deterministic given cfg.seed.
    """
    n = truthH.grid.n
    truthG = np.asarray(truthG, dtype=float)
    truthA = np.asarray(truthA, dtype=float)
    if truthG.shape != (n, tg.m + 1) or truthA.shape != (n, tg.m + 1):
        raise ValueError(
            f"field samples must be (n, m+1) = ({n}, {tg.m + 1}); "
            f"got {truthG.shape} and {truthA.shape}"
        )
    rng = stream(cfg.seed)
    eps = sample_gaussian_errors(n, cfg, rng)
    wG = _increment_matrix(n, tg, rng)
    wA = wG if cfg.shared_noise else _increment_matrix(n, tg, rng)
    return NoisyObservations(
        hTilde=GridFunction(grid=truthH.grid, values=truthH.values + eps),
        gTilde=truthG + cfg.vartheta * wG,
        aTilde=truthA + cfg.varthetabar * wA,
    )
