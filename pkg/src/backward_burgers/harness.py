"""Monte-Carlo driver: observe -> estimate -> solve backward -> measure rates.

A full experiment is a pure function of (ExperimentConfig, base seed): trial k
at ladder point n draws its noise from the Philox stream keyed
(base_seed, n, k), trials are reduced in index order, and the emitted CSV is
byte-stable across reruns.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .manufactured import ManufacturedProblem, manufacture
from .noise import NoiseConfig, TimeGrid, observe
from .operators import CutoffMode, RegParams
from .regression import (
    TruncationSet,
    empirical_mse,
    estimate_static,
    estimate_time_field,
    theoretical_mse_order,
)
from .solvers import backward_solve_regularized, error_at
from .spectral import GridFunction, make_grid

__all__ = [
    "PROBLEMS",
    "get_problem",
    "ExperimentConfig",
    "ReportRow",
    "ErrorReport",
    "RateFit",
    "resolve_params",
    "pipeline_error_order",
    "run_trial",
    "run_monte_carlo",
    "run_regression_study",
    "fit_rate",
    "emit_outputs",
    "read_report",
    "parabola_coefficients",
    "parabola_tail_energy",
]

# closed forms; sources are derived symbolically by manufacture()
PROBLEMS = {
    "linear_heat": ("exp(-t)*sin(x)", "1"),
    "burgers_canonical": ("exp(-t)*sin(x)", "2 + sin(x)*cos(t)"),
}


@lru_cache(maxsize=None)
def get_problem(name: str, T: float) -> ManufacturedProblem:
    if name not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}")
    u_expr, a_expr = PROBLEMS[name]
    return manufacture(u_expr, a_expr, T, name=name)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a ladder run needs; schedules are named rules with overrides.

    Schedule rules (resolved per ladder point n):
      beta_rule   "n" (beta_n = n), "balanced" (n^(4 mu0/(mu0+1/2))), or a number
      rho_rule    "log" (rho_n = rho_alpha * ln n, rho_alpha defaulting to
                  mu0/(2T)), or a number
      qhat_rule   "const" (qhat0) or "loglog" (qhat0 * sqrt(ln ln (n+16)))
      kappa_rule  "rho" (kappa_n = rho_n) or a number
    """

    problem: str = "burgers_canonical"
    T: float = 1.0
    a0: float = 3.0
    a1: float = 4.0
    gamma: float = 1.0
    mu0: float = 2.0
    ladder: tuple = (64, 128, 256, 512)
    m_per_n: int = 2
    trials: int = 64
    times: tuple = None
    sigma: float = 0.01
    vartheta: float = 0.01
    varthetabar: float = 0.01
    vmax: float = 1.0
    shared_noise: bool = False
    beta_rule: str = "n"
    rho_rule: str = "log"
    rho_alpha: float = None
    qhat_rule: str = "const"
    qhat0: float = 2.0
    kappa_rule: str = "rho"
    base_seed: int = 0
    cutoff: str = "clamped"
    nonlinearity: bool = True
    c_stab: float = 0.5

    def __post_init__(self):
        ladder = tuple(int(n) for n in self.ladder)
        if len(ladder) == 0 or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError(f"ladder must be strictly increasing and nonempty: {ladder}")
        object.__setattr__(self, "ladder", ladder)
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        times = self.times if self.times is not None else (0.0, self.T / 2.0)
        object.__setattr__(self, "times", tuple(float(t) for t in times))
        if self.m_per_n < 1:
            raise ValueError(f"m_per_n must be >= 1, got {self.m_per_n}")
        CutoffMode(self.cutoff)  # validates the name
        for n in ladder:
            resolve_params(self, n)  # every schedule must resolve to numbers

    def m_for(self, n: int) -> int:
        return self.m_per_n * n


def _rule_value(rule, fallback=None):
    """A schedule entry is either a rule name or a plain number."""
    if isinstance(rule, (int, float)):
        return float(rule)
    try:
        return float(rule)
    except (TypeError, ValueError):
        return fallback


def resolve_params(cfg: ExperimentConfig, n: int) -> RegParams:
    """Resolve the named schedules to concrete RegParams for ladder point n."""
    beta = _rule_value(cfg.beta_rule)
    if beta is None:
        if cfg.beta_rule == "n":
            beta = float(n)
        elif cfg.beta_rule == "balanced":
            beta = float(n) ** (4.0 * cfg.mu0 / (cfg.mu0 + 0.5))
        else:
            raise ValueError(f"unknown beta rule {cfg.beta_rule!r}")
    rho = _rule_value(cfg.rho_rule)
    if rho is None:
        if cfg.rho_rule == "log":
            alpha = cfg.rho_alpha if cfg.rho_alpha is not None else cfg.mu0 / (2.0 * cfg.T)
            rho = alpha * math.log(n)
        else:
            raise ValueError(f"unknown rho rule {cfg.rho_rule!r}")
    if cfg.qhat_rule == "const":
        qhat = cfg.qhat0
    elif cfg.qhat_rule == "loglog":
        qhat = cfg.qhat0 * math.sqrt(math.log(math.log(n + 16.0)))
    else:
        raise ValueError(f"unknown qhat rule {cfg.qhat_rule!r}")
    kappa = _rule_value(cfg.kappa_rule)
    if kappa is None:
        if cfg.kappa_rule == "rho":
            kappa = None  # RegParams defaults kappa_n = rho_n
        else:
            raise ValueError(f"unknown kappa rule {cfg.kappa_rule!r}")
    return RegParams(
        a0=cfg.a0,
        a1=cfg.a1,
        rhoN=rho,
        betaN=beta,
        qhatN=qhat,
        kappaN=kappa,
        gamma=cfg.gamma,
        mu0=cfg.mu0,
    )


@dataclass(frozen=True)
class ReportRow:
    n: int
    t: float
    beta_n: float
    rho_n: float
    qhat_n: float
    kappa_n: float
    trials: int
    mean_sq_error: float
    var_sq_error: float
    theory_order: float


@dataclass(frozen=True)
class ErrorReport:
    """Per-(n, t) error statistics plus the raw per-trial values."""

    rows: tuple
    wallclock: dict = field(default_factory=dict)  # n -> seconds
    per_trial: dict = field(default_factory=dict)  # (n, t) -> ndarray


@dataclass(frozen=True)
class RateFit:
    """Least-squares line on (log n, log mean error) next to the theory slope."""

    slope: float
    intercept: float
    residual_norm: float
    theory_slope: float
    n_points: int


def pipeline_error_order(rp: RegParams, n: int, t: float, T: float) -> float:
    """Reference order of the full pipeline error at time t.

    exp(16 qhat^2 T / (a1 - a0)) e^(-2 kappa t)
        * max(e^(2 rho T) sqrt(beta) n^(-4 mu0),
              e^(2 rho T) beta^(-mu0),
              rho^(-2 gamma))

    computed in log space and reported as inf on overflow (reference only).
    """
    log_front = 16.0 * rp.qhatN**2 * T / (rp.a1 - rp.a0) - 2.0 * rp.kappaN * t
    branches = (
        2.0 * rp.rhoN * T + 0.5 * math.log(rp.betaN) - 4.0 * rp.mu0 * math.log(n),
        2.0 * rp.rhoN * T - rp.mu0 * math.log(rp.betaN),
        -2.0 * rp.gamma * math.log(rp.rhoN),
    )
    log_val = log_front + max(branches)
    return math.inf if log_val > 709.0 else math.exp(log_val)


def _child_seed(base_seed: int, *keys: int) -> int:
    """64-bit child seed for the (n, trial) stream, derived via SeedSequence."""
    ss = np.random.SeedSequence([int(base_seed), *map(int, keys)])
    return int(ss.generate_state(1, np.uint64)[0])


def _noise_config(cfg: ExperimentConfig, n: int, seed: int) -> NoiseConfig:
    return NoiseConfig(
        sigma=np.full(n, cfg.sigma),
        vartheta=cfg.vartheta,
        varthetabar=cfg.varthetabar,
        vmax=cfg.vmax,
        seed=seed,
        shared_noise=cfg.shared_noise,
    )


def run_trial_solution(cfg: ExperimentConfig, n: int, trial_index: int):
    """One observe -> estimate -> backward-solve pass, keeping the trajectory.

    Returns (TrajectorySolution, {t: squared L2 error}).  Deterministic given
    (cfg.base_seed, n, trial_index); solver aborts are re-raised with the
    trial identification attached.
    """
    try:
        problem = get_problem(cfg.problem, cfg.T)
        grid = make_grid(n)
        tg = TimeGrid(m=cfg.m_for(n), T=cfg.T)
        obs = observe(
            problem.terminal(grid),
            problem.source_matrix(grid, tg),
            problem.coeff_matrix(grid, tg),
            tg,
            _noise_config(cfg, n, _child_seed(cfg.base_seed, n, trial_index)),
        )
        rp = resolve_params(cfg, n)
        ts = TruncationSet(rp.betaN)
        hhat = estimate_static(obs.hTilde, ts)
        ghat = estimate_time_field(obs.gTilde, tg, ts)
        ahat = estimate_time_field(obs.aTilde, tg, ts)
        sol = backward_solve_regularized(
            hhat,
            ghat,
            ahat,
            rp,
            grid,
            tg,
            nonlinearity=cfg.nonlinearity,
            cutoff_mode=CutoffMode(cfg.cutoff),
            c_stab=cfg.c_stab,
        )
        return sol, {t: error_at(t, sol, problem) ** 2 for t in cfg.times}
    except Exception as exc:
        raise RuntimeError(f"trial failed (n={n}, trial_index={trial_index}): {exc}") from exc


def run_trial(cfg: ExperimentConfig, n: int, trial_index: int) -> dict:
    """One observe -> estimate -> backward-solve pass; {t: squared L2 error}."""
    return run_trial_solution(cfg, n, trial_index)[1]


def run_monte_carlo(cfg: ExperimentConfig) -> ErrorReport:
    """Mean/variance of the squared error over cfg.trials per ladder point.

    Trials run (and are reduced) in index order regardless of how they might
    be scheduled, so the report is reproducible bit-for-bit.  A failed trial
    fails the run; nothing is dropped silently.
    """
    rows = []
    wallclock = {}
    per_trial = {}
    for n in cfg.ladder:
        tic = time.perf_counter()
        errors = {t: np.empty(cfg.trials) for t in cfg.times}
        for k in range(cfg.trials):
            result = run_trial(cfg, n, k)
            for t in cfg.times:
                errors[t][k] = result[t]
        wallclock[n] = time.perf_counter() - tic
        rp = resolve_params(cfg, n)
        for t in cfg.times:
            arr = errors[t]
            rows.append(
                ReportRow(
                    n=n,
                    t=t,
                    beta_n=rp.betaN,
                    rho_n=rp.rhoN,
                    qhat_n=rp.qhatN,
                    kappa_n=rp.kappaN,
                    trials=cfg.trials,
                    mean_sq_error=float(np.mean(arr)),
                    var_sq_error=float(np.var(arr, ddof=1)) if cfg.trials > 1 else 0.0,
                    theory_order=pipeline_error_order(rp, n, t, cfg.T),
                )
            )
            per_trial[(n, t)] = arr
    return ErrorReport(rows=tuple(rows), wallclock=wallclock, per_trial=per_trial)


# --- Static-estimator MSE study (regression only, no solver) ----------------

_PARABOLA_C = 4.0 * math.sqrt(2.0 / math.pi)


def parabola_coefficients(pmax: int) -> np.ndarray:
    """Sine coefficients of H(x) = x(pi - x): 4 sqrt(2/pi) / p^3 for odd p."""
    p = np.arange(1, pmax + 1, dtype=float)
    c = _PARABOLA_C / p**3
    c[1::2] = 0.0
    return c


def parabola_tail_energy(pcut: int, pmax: int = 2_000_001) -> float:
    """sum_{p > pcut} c_p^2 by direct summation (remainder < 1e-30)."""
    p = np.arange(1, pmax, 2, dtype=float)  # odd modes only
    c2 = (_PARABOLA_C / p**3) ** 2
    return float(np.sum(c2[p > pcut]))


def run_regression_study(
    ladder,
    trials: int,
    sigma: float,
    base_seed: int,
    mu0: float = 0.75,
    vmax: float = 1.0,
) -> ErrorReport:
    """Empirical vs theoretical MSE of the static estimator for H = x(pi - x).

    Uses the beta_n = n schedule.  The regularization columns do not apply to
    a regression-only study and are reported as NaN.
    """
    rows = []
    wallclock = {}
    per_trial = {}
    for n in ladder:
        n = int(n)
        tic = time.perf_counter()
        ts = TruncationSet(float(n))
        grid = make_grid(n)
        truth = GridFunction(grid=grid, values=grid.points * (math.pi - grid.points))
        cfg = NoiseConfig(
            sigma=np.full(n, sigma),
            vartheta=0.0,
            varthetabar=0.0,
            vmax=vmax,
            seed=_child_seed(base_seed, n),
        )
        mse = empirical_mse(
            truth,
            parabola_coefficients(ts.pcut),
            ts,
            cfg,
            trials,
            tail_energy=parabola_tail_energy(ts.pcut),
        )
        wallclock[n] = time.perf_counter() - tic
        rows.append(
            ReportRow(
                n=n,
                t=0.0,
                beta_n=float(n),
                rho_n=math.nan,
                qhat_n=math.nan,
                kappa_n=math.nan,
                trials=trials,
                mean_sq_error=mse,
                var_sq_error=math.nan,
                theory_order=theoretical_mse_order(n, float(n), mu0),
            )
        )
    return ErrorReport(rows=tuple(rows), wallclock=wallclock, per_trial=per_trial)


def fit_rate(report: ErrorReport, t: float) -> RateFit:
    """Log-log rate of the mean error over the ladder at evaluation time t."""
    rows = [r for r in report.rows if r.t == t]
    if len(rows) < 3:
        raise ValueError(f"need at least 3 ladder points at t={t}, got {len(rows)}")
    means = np.array([r.mean_sq_error for r in rows])
    if np.any(means <= 0.0):
        raise ValueError("log-log fit needs strictly positive mean errors")
    x = np.log([r.n for r in rows])
    y = np.log(means)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.linalg.norm(y - (slope * x + intercept)))
    theory = np.array([r.theory_order for r in rows])
    theory_slope = float(np.polyfit(x, np.log(theory), 1)[0])
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        residual_norm=residual,
        theory_slope=theory_slope,
        n_points=len(rows),
    )


# --- File outputs ------------------------------------------------------------

CSV_HEADER = (
    "n,t,beta_n,rho_n,qhat_n,kappa_n,trials,mean_sq_error,var_sq_error,theory_order"
)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit_outputs(report: ErrorReport, csv_path, plot_path=None):
    """Write the report CSV and a gnuplot script that references only the CSV.

    Both files are replaced atomically; reruns overwrite.  Floats carry 17
    significant digits so parsing the CSV reproduces the report exactly.
    """
    if not report.rows:
        raise ValueError("refusing to write an empty report")
    csv_path = os.fspath(csv_path)
    if plot_path is None:
        plot_path = os.path.splitext(csv_path)[0] + ".gp"
    plot_path = os.fspath(plot_path)

    lines = [CSV_HEADER]
    for r in report.rows:
        lines.append(
            ",".join(
                [
                    str(int(r.n)),
                    _fmt(r.t),
                    _fmt(r.beta_n),
                    _fmt(r.rho_n),
                    _fmt(r.qhat_n),
                    _fmt(r.kappa_n),
                    str(int(r.trials)),
                    _fmt(r.mean_sq_error),
                    _fmt(r.var_sq_error),
                    _fmt(r.theory_order),
                ]
            )
        )
    _atomic_write(csv_path, "\n".join(lines) + "\n")

    times = sorted({r.t for r in report.rows})
    csv_name = os.path.basename(csv_path)
    plot_lines = [
        "# log-log error vs n; run:  gnuplot " + os.path.basename(plot_path),
        'set datafile separator ","',
        "set logscale xy",
        'set xlabel "n"',
        'set ylabel "mean squared error"',
        "set key left bottom",
    ]
    pieces = []
    for t in times:
        sel = f"(abs($2-({_fmt(t)}))<1e-12)"
        pieces.append(
            f"'{csv_name}' every ::1 using ({sel}?$1:1/0):8 with linespoints title 'empirical t={t:g}'"
        )
        pieces.append(
            f"'{csv_name}' every ::1 using ({sel}?$1:1/0):10 with lines dashtype 2 title 'theory order t={t:g}'"
        )
    plot_lines.append("plot \\\n    " + ", \\\n    ".join(pieces))
    plot_lines.append("pause -1")
    _atomic_write(plot_path, "\n".join(plot_lines) + "\n")
    return csv_path, plot_path


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def read_report(path) -> ErrorReport:
    """Parse an emitted CSV back into an ErrorReport (statistics only)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        for rec in reader:
            rows.append(
                ReportRow(
                    n=int(rec[0]),
                    t=float(rec[1]),
                    beta_n=float(rec[2]),
                    rho_n=float(rec[3]),
                    qhat_n=float(rec[4]),
                    kappa_n=float(rec[5]),
                    trials=int(rec[6]),
                    mean_sq_error=float(rec[7]),
                    var_sq_error=float(rec[8]),
                    theory_order=float(rec[9]),
                )
            )
    return ErrorReport(rows=tuple(rows))
