"""Forward cross-check solver and the regularized backward solver."""

import math

import numpy as np
import pytest

from backward_burgers.manufactured import manufacture
from backward_burgers.noise import TimeGrid
from backward_burgers.operators import CutoffMode, RegParams
from backward_burgers.regression import (
    TimeField,
    TruncationSet,
    estimate_static,
    estimate_time_field,
)
from backward_burgers.solvers import (
    TrajectorySolution,
    backward_solve_regularized,
    error_at,
    forward_solve,
)
from backward_burgers.spectral import GridFunction, SpectralCoeffs, analyze, make_grid


@pytest.fixture(scope="module")
def nonlinear_unit():
    return manufacture("exp(-t)*sin(x)", "1", T=1.0)


@pytest.fixture(scope="module")
def linear_unit():
    return manufacture("exp(-t)*sin(x)", "1", T=1.0, include_nonlinearity=False)


@pytest.fixture(scope="module")
def canonical():
    return manufacture("exp(-t)*sin(x)", "2 + sin(x)*cos(t)", T=1.0)


def exact_fields(problem, grid, tg):
    """Full-band noiseless estimates: exact grid representation of G and A."""
    full = TruncationSet(betaN=float((grid.n - 1) ** 2))
    ghat = estimate_time_field(problem.source_matrix(grid, tg), tg, full)
    ahat = estimate_time_field(problem.coeff_matrix(grid, tg), tg, full)
    return ghat, ahat


def zero_field(tg, pmax=3):
    return TimeField(timegrid=tg, coeffs=np.zeros((tg.m + 1, pmax)))


class TestForward:
    def test_manufactured_terminal_hit(self, nonlinear_unit):
        grid = make_grid(256)
        tg = TimeGrid(m=512, T=1.0)
        sol = forward_solve(nonlinear_unit, grid, tg)
        assert error_at(1.0, sol, nonlinear_unit) <= 1e-3

    def test_halving_convergence(self, nonlinear_unit):
        errs = []
        for n, m in ((64, 128), (128, 256)):
            sol = forward_solve(nonlinear_unit, make_grid(n), TimeGrid(m=m, T=1.0))
            errs.append(error_at(1.0, sol, nonlinear_unit))
        assert errs[0] / errs[1] >= 2.0

    def test_zero_data_stays_zero(self):
        prob = manufacture("0", "1", T=1.0)
        sol = forward_solve(prob, make_grid(32), TimeGrid(m=16, T=1.0))
        assert np.max(np.abs(sol.values_matrix())) == 0.0

    def test_linear_heat_mode(self, linear_unit):
        grid = make_grid(256)
        tg = TimeGrid(m=512, T=1.0)
        sol = forward_solve(linear_unit, grid, tg, nonlinearity=False)
        for j in (128, 256, 512):
            truth = math.exp(-tg.nodes[j]) * np.sin(grid.points)
            err = np.sqrt((np.pi / 256) * np.sum((sol.states[j].values - truth) ** 2))
            assert err <= 1e-3

    def test_instability_abort_diagnostic(self, nonlinear_unit):
        with pytest.raises(RuntimeError, match="unstable"):
            forward_solve(
                nonlinear_unit, make_grid(32), TimeGrid(m=8, T=1.0), stability_factor=1e-9
            )

    def test_variable_coefficient_terminal(self, canonical):
        sol = forward_solve(canonical, make_grid(128), TimeGrid(m=256, T=1.0))
        assert error_at(1.0, sol, canonical) <= 1e-3


class TestBackwardLinear:
    def run(self, problem, n, m, rho=8.0, scheme="imex2"):
        grid = make_grid(n)
        tg = TimeGrid(m=m, T=1.0)
        rp = RegParams(a0=1.5, a1=2.0, rhoN=rho, betaN=float(n), qhatN=2.0)
        hhat = estimate_static(problem.terminal(grid), TruncationSet(betaN=float(n)))
        ghat, ahat = exact_fields(problem, grid, tg)
        return backward_solve_regularized(
            hhat, ghat, ahat, rp, grid, tg, nonlinearity=False, scheme=scheme
        )

    def test_single_mode_reconstruction(self, linear_unit):
        # exact backward dynamics for mode 1: dc/dtau = +c, so
        # c(T) = e^-T e^T = 1 and U(., 0) = sin x
        sol = self.run(linear_unit, 256, 1024)
        assert error_at(0.0, sol, linear_unit) <= 1e-2

    def test_error_halves_when_resolution_doubles(self, linear_unit):
        e1 = error_at(0.0, self.run(linear_unit, 128, 512), linear_unit)
        e2 = error_at(0.0, self.run(linear_unit, 256, 1024), linear_unit)
        assert e1 / e2 >= 2.0

    def test_zero_data(self):
        grid = make_grid(32)
        tg = TimeGrid(m=16, T=0.5)
        rp = RegParams(a0=1.0, a1=2.0, rhoN=8.0, betaN=9.0, qhatN=1.0)
        sol = backward_solve_regularized(
            SpectralCoeffs(pmax=3, c=np.zeros(3)), zero_field(tg), zero_field(tg), rp, grid, tg
        )
        assert np.max(np.abs(sol.values_matrix())) == 0.0

    def test_first_order_default_also_meets_tolerance(self, linear_unit):
        sol = self.run(linear_unit, 256, 1024, scheme="be")
        assert error_at(0.0, sol, linear_unit) <= 1e-2

    def test_rejects_unknown_scheme(self, linear_unit):
        with pytest.raises(ValueError, match="scheme"):
            self.run(linear_unit, 32, 16, scheme="rk4")


class TestBackwardStability:
    def test_reversed_time_energy_bound(self):
        # data = 0 except Hhat: ||U(tau)||^2 <= e^(2 rho tau) ||Hhat||^2
        rng = np.random.default_rng(12)
        n, m = 64, 128
        grid = make_grid(n)
        tg = TimeGrid(m=m, T=1.0)
        for rho in (1.0, 4.0, 16.0):
            rp = RegParams(a0=1.0, a1=2.0, rhoN=rho, betaN=16.0, qhatN=1.0)
            hhat = SpectralCoeffs(pmax=8, c=rng.standard_normal(8))
            sol = backward_solve_regularized(
                hhat,
                zero_field(tg),
                zero_field(tg),
                rp,
                grid,
                tg,
                nonlinearity=False,
            )
            h_energy = float(np.sum(hhat.c**2))
            for j, state in enumerate(sol.states):
                tau = tg.T - tg.nodes[j]
                energy = (np.pi / n) * float(np.sum(state.values**2))
                assert energy <= math.exp(2.0 * rho * tau) * h_energy * (1.0 + 1e-12)

    def test_high_mode_damping(self):
        # a mode above the evolved band decays at least like
        # e^(-(a1-a0) q^2 tau / 2); with Ahat = 0 the actual rate is a1 q^2
        n, m, T, q = 64, 256, 0.25, 6
        grid = make_grid(n)
        tg = TimeGrid(m=m, T=T)
        rp = RegParams(a0=2.0, a1=3.0, rhoN=4.0, betaN=16.0, qhatN=1.0)
        assert rp.p_band < q
        c = np.zeros(q)
        c[q - 1] = 1.0
        sol = backward_solve_regularized(
            SpectralCoeffs(pmax=q, c=c), zero_field(tg), zero_field(tg), rp, grid, tg,
            nonlinearity=False,
        )
        amps = [abs(analyze(sol.states[m - j], q).c[q - 1]) for j in range(m + 1)]
        assert all(a1 < a0 for a0, a1 in zip(amps, amps[1:]))  # monotone decay
        taus = tg.T - tg.nodes[::-1]
        bound = np.exp(-(rp.a1 - rp.a0) * q**2 * taus / 2.0)
        assert all(a <= b * (1 + 1e-12) for a, b in zip(amps, bound))

    def test_nonfinite_state_aborts_with_tau(self):
        # a gigantic rho with c_stab loosened lets the explicit amplification
        # overflow; the solver must fail loudly, naming the time
        grid = make_grid(16)
        tg = TimeGrid(m=1024, T=256.0)
        rp = RegParams(a0=1.0, a1=2.0, rhoN=1e8, betaN=4.0, qhatN=1.0)
        hhat = SpectralCoeffs(pmax=15, c=np.ones(15))
        with pytest.raises(RuntimeError, match="tau"):
            with np.errstate(over="ignore", invalid="ignore"):
                backward_solve_regularized(
                    hhat, zero_field(tg), zero_field(tg), rp, grid, tg,
                    nonlinearity=False, c_stab=1e12,
                )

    def test_substepping_respects_c_stab(self):
        # dtau * rho = 2.5 > 0.5 forces 5 substeps; the run stays finite and
        # matches a manually substepped configuration
        grid = make_grid(32)
        tg = TimeGrid(m=8, T=1.0)
        rp = RegParams(a0=1.0, a1=2.0, rhoN=20.0, betaN=16.0, qhatN=1.0)
        rng = np.random.default_rng(3)
        hhat = SpectralCoeffs(pmax=4, c=rng.standard_normal(4))
        sol = backward_solve_regularized(
            hhat, zero_field(tg), zero_field(tg), rp, grid, tg, nonlinearity=False
        )
        fine = backward_solve_regularized(
            hhat,
            zero_field(TimeGrid(m=40, T=1.0)),
            zero_field(TimeGrid(m=40, T=1.0)),
            rp,
            grid,
            TimeGrid(m=40, T=1.0),
            nonlinearity=False,
        )
        np.testing.assert_allclose(
            sol.states[0].values, fine.states[0].values, rtol=0, atol=1e-12
        )


class TestBackwardNonlinear:
    def solve(self, problem, n, rho, m=None, scheme="imex2", estimated=False, mode=CutoffMode.clamped):
        grid = make_grid(n)
        tg = TimeGrid(m=m or 2 * n, T=1.0)
        rp = RegParams(a0=3.0, a1=4.0, rhoN=rho, betaN=float(n), qhatN=2.0)
        if estimated:
            ts = TruncationSet(betaN=float(n))
            ghat = estimate_time_field(problem.source_matrix(grid, tg), tg, ts)
            ahat = estimate_time_field(problem.coeff_matrix(grid, tg), tg, ts)
        else:
            ghat, ahat = exact_fields(problem, grid, tg)
        hhat = estimate_static(problem.terminal(grid), TruncationSet(betaN=float(n)))
        return backward_solve_regularized(
            hhat, ghat, ahat, rp, grid, tg, cutoff_mode=mode, scheme=scheme
        )

    def test_rho_sweep_exact_fields(self, canonical):
        # with exact coefficient/source data the error drops as the band
        # opens, then sits on a discretization floor that the 4x-resolution
        # oracle pushes down; no closed form exists for the regularized
        # problem, so the oracle is the solver itself refined
        errs = {
            rho: error_at(0.0, self.solve(canonical, 128, rho), canonical)
            for rho in (2.0, 4.0, 8.0, 16.0)
        }
        assert errs[2.0] > 10 * errs[4.0]  # band opens: mode 1 evolves
        assert errs[8.0] <= errs[4.0] * (1 + 1e-9)  # same band, same error
        coarse16 = errs[16.0]
        fine16 = error_at(0.0, self.solve(canonical, 512, 16.0, m=2048), canonical)
        assert fine16 <= coarse16 / 4.0  # the rise at rho=16 is pure floor

    def test_rho_sweep_estimated_fields(self, canonical):
        # with beta-truncated field estimates the trade-off appears: opening
        # the band beyond the data quality amplifies the estimation bias
        errs = {
            rho: error_at(0.0, self.solve(canonical, 256, rho, estimated=True, scheme="be"), canonical)
            for rho in (2.0, 4.0, 8.0, 16.0)
        }
        assert errs[2.0] > 1.0  # nothing evolves, no reconstruction
        assert errs[4.0] < 0.15  # mode 1 recovered through the bias
        assert errs[8.0] == pytest.approx(errs[4.0], rel=1e-9)
        assert errs[16.0] > errs[8.0]  # amplified estimation bias

    def test_clamp_inactive_when_solution_within_bounds(self, canonical):
        # |u|, |u_x| <= 1 < qhat = 2: both cutoff modes follow the same branch
        a = self.solve(canonical, 64, 6.0, estimated=True, mode=CutoffMode.clamped)
        b = self.solve(canonical, 64, 6.0, estimated=True, mode=CutoffMode.paper_literal)
        assert np.max(np.abs(a.values_matrix() - b.values_matrix())) <= 1e-12

    def test_ahat_clipped_to_a0_with_warning(self, canonical, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="backward_burgers.solvers"):
            self.solve(canonical, 64, 4.0, estimated=True)
        assert any("clipping" in r.message for r in caplog.records)


class TestErrorAt:
    def test_truth_against_itself(self, canonical):
        grid = make_grid(32)
        tg = TimeGrid(m=8, T=1.0)
        states = tuple(canonical.snapshot(grid, t) for t in tg.nodes)
        sol = TrajectorySolution(timegrid=tg, states=states)
        assert error_at(0.5, sol, canonical) == 0.0

    def test_constant_offset(self, canonical):
        grid = make_grid(64)
        tg = TimeGrid(m=4, T=1.0)
        delta = 0.37
        states = tuple(
            GridFunction(grid=grid, values=canonical.u(grid.points, t) + delta)
            for t in tg.nodes
        )
        sol = TrajectorySolution(timegrid=tg, states=states)
        assert error_at(0.25, sol, canonical) == pytest.approx(delta * math.sqrt(math.pi), rel=1e-12)

    def test_parseval_match_for_band_limited_difference(self, canonical):
        grid = make_grid(128)
        tg = TimeGrid(m=2, T=1.0)
        c = np.array([0.3, -0.2, 0.05])
        from backward_burgers.spectral import synthesize

        bump = synthesize(SpectralCoeffs(pmax=3, c=c), grid).values
        states = tuple(
            GridFunction(grid=grid, values=canonical.u(grid.points, t) + bump)
            for t in tg.nodes
        )
        sol = TrajectorySolution(timegrid=tg, states=states)
        assert error_at(1.0, sol, canonical) == pytest.approx(
            float(np.linalg.norm(c)), abs=1e-10
        )

    def test_rejects_out_of_range(self, canonical):
        grid = make_grid(8)
        tg = TimeGrid(m=2, T=1.0)
        states = tuple(canonical.snapshot(grid, t) for t in tg.nodes)
        sol = TrajectorySolution(timegrid=tg, states=states)
        with pytest.raises(ValueError):
            error_at(-0.1, sol, canonical)
        with pytest.raises(ValueError):
            error_at(1.5, sol, canonical)


def test_trajectory_snapshot_count_enforced():
    grid = make_grid(4)
    tg = TimeGrid(m=3, T=1.0)
    with pytest.raises(ValueError):
        TrajectorySolution(
            timegrid=tg, states=(GridFunction(grid=grid, values=np.zeros(4)),)
        )
