"""Line-search fixed-point solvers for nonexpansive mappings.

Conjugate-gradient-type directions with Wolfe-type step-size conditions,
Krasnosel'skii-Mann baselines, and a benchmark harness for quadratic-over-ball
and convex-feasibility problems.
"""

from .core import Rng, Vector, axpy, derived_seed, dot, norm, sample_uniform_box, vector
from .directions import (
    BETA_KINDS,
    DegenerateDenominator,
    DirectionState,
    beta,
    descent_check,
    next_direction,
)
from .harness import (
    ALGOS,
    ExperimentConfig,
    ExperimentReport,
    ProblemInstance,
    gen_gcfp,
    gen_qp,
    generate_instance,
    run_experiment,
    satisfiability_rate,
)
from .linesearch import (
    LineSearchConfig,
    LineSearchOutcome,
    armijo_backtrack,
    armijo_potential,
    bisection_wolfe_search,
    search_with_fallback,
    strong_wolfe_predicate,
    wolfe_armijo_predicate,
    wolfe_curvature_predicate,
)
from .mappings import (
    Ball,
    DiagonalQuadratic,
    FixedPointMap,
    make_gcfp_map,
    make_projected_gradient_map,
    project_ball,
    qp_gradient,
    residual,
)
from .solver import (
    IterationRecord,
    RunResult,
    SolverConfig,
    rate_bound,
    run_algorithm1,
    run_km_armijo,
    run_km_constant,
)

__version__ = "0.1.0"
