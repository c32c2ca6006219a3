"""Fast self-contained invariant checks behind the `check` CLI subcommand.

Each check returns (name, passed, detail); the CLI prints one line per check.
These mirror the headline library invariants at small sizes so a user can
smoke-test an installation in seconds: the full evidence lives in the pytest
suite.
"""

from __future__ import annotations

import math

import numpy as np

from .noise import NoiseConfig, TimeGrid, observe
from .operators import CutoffMode, RegParams, apply_P, apply_P_trunc, cutoff_F
from .regression import TruncationSet, estimate_static
from .spectral import (
    GridFunction,
    SmoothnessParams,
    SpectralCoeffs,
    analyze,
    basis_matrix,
    gevrey_norm,
    make_grid,
    synthesize,
)

__all__ = ["run_checks"]


def _check_orthogonality():
    grid = make_grid(64)
    psi = basis_matrix(grid, 63)
    gram = (math.pi / 64) * (psi.T @ psi)
    err = float(np.max(np.abs(gram - np.eye(63))))
    return err <= 1e-12, f"max |gram - I| = {err:.2e}"


def _check_roundtrip():
    rng = np.random.default_rng(7)
    grid = make_grid(64)
    worst = 0.0
    for _ in range(20):
        c = SpectralCoeffs(pmax=63, c=rng.standard_normal(63))
        back = analyze(synthesize(c, grid), 63)
        worst = max(worst, float(np.max(np.abs(back.c - c.c))))
    return worst <= 1e-10, f"max roundtrip error = {worst:.2e}"


def _check_p_bound():
    rng = np.random.default_rng(11)
    worst = 0.0
    for rho in (1.0, 4.0, 16.0, 64.0):
        rp = RegParams(a0=0.5, a1=1.0, rhoN=rho, betaN=4.0, qhatN=1.0)
        for _ in range(250):
            c = SpectralCoeffs(pmax=32, c=rng.standard_normal(32))
            ratio = np.linalg.norm(apply_P_trunc(c, rp).c) / (rho * np.linalg.norm(c.c))
            worst = max(worst, float(ratio))
    return worst <= 1.0 + 1e-14, f"max ||P_rho v|| / (rho ||v||) = {worst:.15f}"


def _check_tail_bound():
    T, a1 = 1.0, 2.0
    pmax = 18  # keeps every coefficient a normal double: finite Gevrey norms
    p = np.arange(1, pmax + 1, dtype=float)
    c = SpectralCoeffs(pmax=pmax, c=np.exp(-T * a1 * p**2))
    worst = -math.inf
    for gamma in (0.0, 1.0, 2.0):
        for rho in (1.0, 4.0, 16.0, 64.0):
            rp = RegParams(a0=1.0, a1=a1, rhoN=rho, betaN=4.0, qhatN=1.0, gamma=gamma)
            lhs = np.linalg.norm(apply_P(c, rp).c - apply_P_trunc(c, rp).c)
            bound = a1 * rho**-gamma * math.exp(-T * rho) * gevrey_norm(
                c, SmoothnessParams(gamma=gamma, bigB=T * a1)
            )
            if not math.isfinite(bound):
                return False, "Gevrey norm overflowed on the test family"
            worst = max(worst, float(lhs / bound))
    return worst <= 1.0 + 1e-12, f"max lhs/bound = {worst:.3e}"


def _check_lipschitz():
    rng = np.random.default_rng(23)
    q = 1.5
    v, vh, w, wh = rng.uniform(-3 * q, 3 * q, size=(4, 100_000))
    lhs = np.abs(cutoff_F(v, vh, q) - cutoff_F(w, wh, q))
    rhs = q * (np.abs(v - w) + np.abs(vh - wh))
    margin = float(np.max(lhs - rhs))
    return margin <= 1e-12, f"max violation of the clamped bound = {margin:.2e}"


def _check_literal_witness():
    q = 10.0
    lhs = abs(
        cutoff_F(-1e6, q, q, CutoffMode.paper_literal)
        - cutoff_F(-1e6, q - 1.0, q, CutoffMode.paper_literal)
    )
    rhs = q * (0.0 + 1.0)
    return lhs > rhs, f"literal-mode witness: |dF| = {lhs:.3g} > {rhs:.3g}"


def _check_determinism():
    grid = make_grid(16)
    tg = TimeGrid(m=8, T=1.0)
    truth_h = GridFunction(grid=grid, values=np.sin(grid.points))
    zeros = np.zeros((16, 9))
    cfg = NoiseConfig(
        sigma=np.full(16, 0.1), vartheta=0.2, varthetabar=0.3, vmax=1.0, seed=42
    )
    a = observe(truth_h, zeros, zeros, tg, cfg)
    b = observe(truth_h, zeros, zeros, tg, cfg)
    same = (
        np.array_equal(a.hTilde.values, b.hTilde.values)
        and np.array_equal(a.gTilde, b.gTilde)
        and np.array_equal(a.aTilde, b.aTilde)
    )
    return same, "bit-identical observations for identical (inputs, seed)"


def _check_estimator_exact():
    grid = make_grid(64)
    truth = GridFunction(grid=grid, values=np.sin(grid.points))
    chat = estimate_static(truth, TruncationSet(betaN=16.0))
    expected = np.zeros(4)
    expected[0] = math.sqrt(math.pi / 2.0)
    err = float(np.max(np.abs(chat.c - expected)))
    return err <= 1e-12, f"band-limited estimation error = {err:.2e}"


def _check_backward_zero():
    from .regression import TimeField
    from .solvers import backward_solve_regularized

    grid = make_grid(32)
    tg = TimeGrid(m=16, T=0.5)
    rp = RegParams(a0=1.0, a1=2.0, rhoN=8.0, betaN=9.0, qhatN=1.0)
    zero_field = TimeField(timegrid=tg, coeffs=np.zeros((17, 3)))
    sol = backward_solve_regularized(
        SpectralCoeffs(pmax=3, c=np.zeros(3)), zero_field, zero_field, rp, grid, tg
    )
    peak = float(np.max(np.abs(sol.values_matrix())))
    return peak == 0.0, f"zero data stays exactly zero (max |U| = {peak})"


def run_checks() -> list:
    """Run every invariant check; returns [(name, passed, detail), ...]."""
    checks = [
        ("spectral.discrete_orthogonality", _check_orthogonality),
        ("spectral.analyze_synthesize_roundtrip", _check_roundtrip),
        ("operators.trunc_norm_bound", _check_p_bound),
        ("operators.gevrey_tail_bound", _check_tail_bound),
        ("operators.cutoff_lipschitz", _check_lipschitz),
        ("operators.literal_mode_witness", _check_literal_witness),
        ("noise.observe_determinism", _check_determinism),
        ("regression.band_limited_exact", _check_estimator_exact),
        ("solvers.backward_zero_data", _check_backward_zero),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
