"""Numerical toolkit for two-player zero-sum stochastic differential
games with impulse controls.

The value function solves a double-obstacle quasi-variational inequality;
this package computes it three independent ways (monotone finite
differences, a lattice dynamic-programming oracle, and policy Monte
Carlo) and cross-checks them.
"""

from .grids import DomainError, Grid, GridSlice, shift_exact
from .kernels import BACKEND
from .lattice import (
    LatticeModel,
    backward_semigroup_step,
    build_lattice,
    dpp_residual,
    isaacs_gap,
    moment_check,
    solve_game,
)
from .mc import (
    FeedbackPolicy,
    PathEnsemble,
    UnsupportedDriverError,
    evaluate_cost_mc,
    extract_policy,
    simulate_paths,
)
from .obstacles import ObstacleSlice, lower_obstacle, upper_obstacle
from .pde import (
    CFLError,
    CONT,
    I_INT,
    II_INT,
    NonConvergenceError,
    ResidualField,
    SpaceTimeGrid,
    ValidationError,
    ValueField,
    hamiltonian,
    holder_t,
    lipschitz_x,
    make_spacetime_grid,
    project_double_obstacle,
    qvi_residual,
    qvi_residual_transformed,
    solve_pde,
    step_backward,
    terminal_bound_constant,
    terminal_projection,
    theta_transform,
)
from .problems import (
    AssumptionReport,
    CANONICAL_PROBLEMS,
    CoefficientForm,
    DiscreteImpulseSet,
    ProblemSpec,
    evaluate_coefficients,
    get_problem,
    validate_assumptions,
)
from .schedules import (
    ImpulseSchedule,
    MergedTimeline,
    accumulate_theta,
    concat,
    impulse_count,
    merge_with_priority,
    restrict,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "BACKEND",
    "CANONICAL_PROBLEMS",
    "CFLError",
    "CONT",
    "CoefficientForm",
    "DiscreteImpulseSet",
    "DomainError",
    "FeedbackPolicy",
    "Grid",
    "GridSlice",
    "I_INT",
    "II_INT",
    "ImpulseSchedule",
    "LatticeModel",
    "MergedTimeline",
    "NonConvergenceError",
    "ObstacleSlice",
    "PathEnsemble",
    "ProblemSpec",
    "ResidualField",
    "SpaceTimeGrid",
    "UnsupportedDriverError",
    "ValidationError",
    "ValueField",
    "accumulate_theta",
    "backward_semigroup_step",
    "build_lattice",
    "concat",
    "dpp_residual",
    "evaluate_coefficients",
    "evaluate_cost_mc",
    "extract_policy",
    "get_problem",
    "hamiltonian",
    "holder_t",
    "impulse_count",
    "lipschitz_x",
    "isaacs_gap",
    "lower_obstacle",
    "make_spacetime_grid",
    "merge_with_priority",
    "moment_check",
    "project_double_obstacle",
    "qvi_residual",
    "qvi_residual_transformed",
    "restrict",
    "shift_exact",
    "simulate_paths",
    "solve_game",
    "solve_pde",
    "step_backward",
    "terminal_bound_constant",
    "terminal_projection",
    "theta_transform",
    "upper_obstacle",
    "validate_assumptions",
]
