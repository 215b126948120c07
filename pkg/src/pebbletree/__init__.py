"""Optimal unlabeled pebble motion and anonymous MAPF on trees.

Pebbles (agents) are interchangeable: any final occupancy matching the
target set is a solution.  On trees the sequential optimum equals the demand
certificate sum(|d(u)|) and is produced in linear-plus-output time; the
simultaneous scheduler reuses the same certificate with makespan <= n - k
and sum of costs <= k(n - k).  Independent oracles (configuration BFS,
min-cost matching, joint-configuration search) let every claim be verified.
"""

from ._jit import JIT_ENABLED, backend
from .errors import (
    BudgetExceededError,
    InfeasibleInstanceError,
    InstanceFormatError,
    InvalidTreeError,
    KernelError,
    PebbleTreeError,
)
from .tree_core import (
    DemandTable,
    Instance,
    RootedTree,
    Tree,
    compute_demands,
    enumerate_labeled_trees,
    format_instance,
    parse_instance,
    path_tree,
    random_instance,
    random_labeled_tree,
    root_tree,
    subtree_sizes,
)
from .upmt import (
    Move,
    Plan,
    SolverState,
    balance_subtrees,
    extract_pebble,
    format_plan,
    inject_pebble,
    lower_bound,
    move_pebble,
    new_solver_state,
    parse_plan,
    solve_upmt,
)
from .mapf import (
    SchedulerState,
    TimedMove,
    TimedPlan,
    format_timed_plan,
    makespan,
    new_scheduler,
    parse_timed_plan,
    process_node,
    send_agent,
    solve_mapf,
    solve_mapf_with_state,
    sum_of_costs,
)
from .validate import ValidationReport, reconstruct_trajectories, validate_mapf, validate_upmt
from .oracle import (
    SweepResult,
    oracle_mapf_optimal,
    oracle_opt_bfs,
    oracle_opt_matching,
    tree_distance,
    verify_all_small_trees,
)
from .experiments import (
    BoundCheckResult,
    ExperimentConfig,
    ExperimentRow,
    average_distance,
    bench_solve,
    check_expected_bound,
    run_opt_experiment,
)

__version__ = "0.1.0"
