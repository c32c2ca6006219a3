"""Backward-in-time reconstruction for a 1-D Burgers'-type equation.

Reconstructs u(., 0) from noisy terminal data, source paths and diffusion
coefficient paths via truncated sine-series regression and a
quasi-reversibility-regularized terminal-value solver, and verifies the
operator bounds, Lipschitz clamp and convergence rates empirically.
"""

from .harness import (
    ErrorReport,
    ExperimentConfig,
    RateFit,
    emit_outputs,
    fit_rate,
    run_monte_carlo,
    run_regression_study,
    run_trial,
)
from .manufactured import ManufacturedProblem, manufacture
from .noise import BrownianPath, NoiseConfig, NoisyObservations, TimeGrid, observe
from .operators import CutoffMode, RegParams, apply_P, apply_P_trunc, cutoff_F, variable_diffusion
from .regression import (
    TimeField,
    TruncationSet,
    empirical_mse,
    estimate_static,
    estimate_time_field,
    theoretical_mse_order,
)
from .solvers import TrajectorySolution, backward_solve_regularized, error_at, forward_solve
from .spectral import (
    GridFunction,
    SmoothnessParams,
    SpatialGrid,
    SpectralCoeffs,
    analyze,
    basis_eval,
    gevrey_norm,
    make_grid,
    sobolev_norm,
    synthesize,
)

__version__ = "0.1.0"
