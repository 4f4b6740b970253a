"""Learned zero-variable prediction and trust-region search for parametric MIPs.

The package covers the full pipeline: instance generation, an embedded
branch-and-bound MILP solver, solution-pool dataset assembly, bipartite
graph encoding with identity-aware features, an attention-based scoring
network trained with exact hand-written gradients, neighborhood search
guided by the scores, and a benchmarking harness (primal gap / primal
integral / Wilcoxon tests).
"""

from .instance import (
    FeasibilityReport,
    MipInstance,
    Row,
    Sense,
    Solution,
    VarKind,
    binarize_solution,
    check_feasibility,
    evaluate_objective,
    instance_from_dict,
    instance_to_dict,
    instance_to_json,
    load_instance,
    make_solution,
    save_instance,
)
from .lp import LpResult, LpStatus, solve_lp_relaxation

__all__ = [
    "FeasibilityReport",
    "MipInstance",
    "Row",
    "Sense",
    "Solution",
    "VarKind",
    "binarize_solution",
    "check_feasibility",
    "evaluate_objective",
    "instance_from_dict",
    "instance_to_dict",
    "instance_to_json",
    "load_instance",
    "make_solution",
    "save_instance",
    "LpResult",
    "LpStatus",
    "solve_lp_relaxation",
]

__version__ = "0.1.0"
