"""Fair network topology inference from stationary graph signals."""

__version__ = "0.1.0"

from fair_topo.graph_core import (
    AdjacencyMatrix,
    ConstraintSet,
    GroupAssignment,
    Normalization,
    indicator_matrix,
    project_to_constraint_set,
)
from fair_topo.fairness import BiasReport, bias_report, build_B, delta_dp, delta_dp_node
from fair_topo.signals import (
    CovarianceEstimate,
    FilterSpec,
    analytic_covariance,
    apply_filter,
    commutativity_residual,
    random_filter,
    sample_covariance,
    sample_signals,
    sampled_covariance,
)
from fair_topo.vectorize import Penalty, VectorizedProblem, build_vectorized, unvec_upper, vec_upper
from fair_topo.solver import (
    EpsilonRule,
    InfeasibleProblemError,
    SolveConfig,
    SolveReport,
    min_commutator_residual,
    select_epsilon,
    solve_convex,
    solve_l0_bruteforce,
)
from fair_topo.synth import GroupMode, RewireSpec, assign_groups, generate_two_group_graph
from fair_topo.certify import CertificateReport, certify, check_condition1, check_condition2

__all__ = [
    "EpsilonRule",
    "GroupMode",
    "InfeasibleProblemError",
    "RewireSpec",
    "assign_groups",
    "generate_two_group_graph",
    "min_commutator_residual",
    "random_filter",
    "sampled_covariance",
    "select_epsilon",
    "AdjacencyMatrix",
    "BiasReport",
    "CertificateReport",
    "ConstraintSet",
    "CovarianceEstimate",
    "FilterSpec",
    "GroupAssignment",
    "Normalization",
    "Penalty",
    "SolveConfig",
    "SolveReport",
    "VectorizedProblem",
    "analytic_covariance",
    "apply_filter",
    "bias_report",
    "build_B",
    "build_vectorized",
    "certify",
    "check_condition1",
    "check_condition2",
    "commutativity_residual",
    "delta_dp",
    "delta_dp_node",
    "indicator_matrix",
    "project_to_constraint_set",
    "sample_covariance",
    "sample_signals",
    "solve_convex",
    "solve_l0_bruteforce",
    "unvec_upper",
    "vec_upper",
]
