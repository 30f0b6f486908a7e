"""Exact structural-robustness verification for message-passing GNNs."""

from .bounds import (
    BoundState,
    BudgetContext,
    SelectionBudget,
    aggr_bounds,
    decide_unsat,
    propagate,
    relax_mat,
)
from .bruteforce import GadgetSpec, brute_check, brute_radius, make_gadget, subset_sum_solve
from .graphs import (
    EdgeStatus,
    FeaturedGraph,
    IncompleteGraph,
    completions,
    distance,
    grounding,
    in_perturbation_space,
    neighbors,
    refines,
    relaxation,
)
from .instance import RobustnessInstance, all_pairs_fragile, delete_only_fragile
from .models import (
    Aggregation,
    GnnModel,
    Layer,
    Pooling,
    TaskTarget,
    forward,
    predict_graph,
    predict_node,
    violates,
)
from .oracle import BoundCache, OracleVerdict, apply_edge, oracle_call, undo_edge
from .search import (
    SearchConfig,
    SearchStats,
    Verdict,
    VerdictKind,
    infer_local,
    pick_edge,
    radius_instance,
    verify_instance,
)

__version__ = "0.1.0"
