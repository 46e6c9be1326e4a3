"""fastrons: reduced-order nonlinear solutions of time-dependent PDEs.

Shape-morphing ansatz families, closed-form and collocation assembly of the
parameter dynamics, constrained and Tikhonov-regularised solvers, explicit
adaptive integrators and independent reference solvers.
"""
from ._core import BACKEND
from .ansatz import (
    FokkerPlanck,
    FourierGalerkin,
    GaussianMixture,
    Heat,
    KuramotoSivashinsky,
    LayoutError,
    ParameterState,
    SingularParameterError,
    TanhNetwork,
    conserved_mass,
)
from .crons import (
    CollocationSystem,
    MonteCarloSystem,
    assemble_collocation,
    assemble_monte_carlo,
    augment_constraints,
)
from .integrators import IntegratorConfig, Trajectory, integrate
from .solvers import (
    RegularizationConfig,
    condition_diagnostics,
    cost_functional,
    pinv_solve,
    solve_constrained_rons,
    solve_monte_carlo,
    solve_regularized_crons,
    solve_regularized_rons,
)
from .srons import assemble_metric_symbolic, assemble_rhs_symbolic, conserved_probability

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CollocationSystem",
    "FokkerPlanck",
    "FourierGalerkin",
    "GaussianMixture",
    "Heat",
    "IntegratorConfig",
    "KuramotoSivashinsky",
    "LayoutError",
    "MonteCarloSystem",
    "ParameterState",
    "RegularizationConfig",
    "SingularParameterError",
    "TanhNetwork",
    "Trajectory",
    "assemble_collocation",
    "assemble_metric_symbolic",
    "assemble_monte_carlo",
    "assemble_rhs_symbolic",
    "augment_constraints",
    "condition_diagnostics",
    "conserved_mass",
    "conserved_probability",
    "cost_functional",
    "integrate",
    "pinv_solve",
    "solve_constrained_rons",
    "solve_monte_carlo",
    "solve_regularized_crons",
    "solve_regularized_rons",
]
