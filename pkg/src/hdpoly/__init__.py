"""High-dimensional polynomial approximation from random samples.

Adaptive weighted least squares and sparse-regression (square-root LASSO)
approximation of multivariate functions on [-1,1]^d, with Monte Carlo and
Christoffel-based near-optimal sampling, a benchmark target-function suite,
and brute-force oracles for the quantities the methods are measured against.
"""

from .multi_index import (
    MultiIndex,
    IndexSet,
    CoefVector,
    margin,
    reduced_margin,
    tensor_set,
    total_degree_set,
    hyperbolic_cross_anchored,
    weighted_cardinality,
)
from .poly_basis import (
    BasisFamily,
    DesignMatrix,
    eval_univariate,
    eval_tensor,
    intrinsic_weight,
    christoffel,
    kappa,
    build_design_matrix,
)
from .sampling import (
    Grid,
    SampleSet,
    draw_grid,
    save_grid,
    load_grid,
    draw_mc,
    near_optimal_distribution,
    draw_near_optimal,
)
from .weighted_ls import LSResult, AlsTrace, solve_wls, discrete_inner, bulk, m_from_scaling, als_run
from .sr_lasso import SrLassoConfig, CsResult, objective, primal_dual, restarted, cs_approximate, extract_top_n
from .test_functions import TargetFunction, FemSolver1D, ParametricDiffusion, get_target
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    RecordRow,
    run_experiment,
    relative_error,
    geometric_stats,
    emit,
)

__all__ = [
    "MultiIndex", "IndexSet", "CoefVector",
    "margin", "reduced_margin", "tensor_set", "total_degree_set",
    "hyperbolic_cross_anchored", "weighted_cardinality",
    "BasisFamily", "DesignMatrix", "eval_univariate", "eval_tensor",
    "intrinsic_weight", "christoffel", "kappa", "build_design_matrix",
    "Grid", "SampleSet", "draw_grid", "save_grid", "load_grid",
    "draw_mc", "near_optimal_distribution", "draw_near_optimal",
    "LSResult", "AlsTrace", "solve_wls", "discrete_inner", "bulk",
    "m_from_scaling", "als_run",
    "SrLassoConfig", "CsResult", "objective", "primal_dual", "restarted",
    "cs_approximate", "extract_top_n",
    "TargetFunction", "FemSolver1D", "ParametricDiffusion", "get_target",
    "ExperimentConfig", "ExperimentResult", "RecordRow", "run_experiment",
    "relative_error", "geometric_stats", "emit",
]

__version__ = "0.1.0"
