"""Independent plan validation by replay.

Nothing here trusts solver bookkeeping: adjacency is re-derived from the
instance (sorted CSR + binary search), occupancy is replayed move by move,
and for timed plans each timestep is checked as a simultaneous batch
(distinct sources, no vertex conflicts, no edge swaps, no moves onto nodes
that stay occupied).  Metrics use the last-arrival cost model: an agent that
never moves costs 0, otherwise its cost is the timestep at which it arrives
at its final node, so waiting before that final arrival is charged and
sum-of-costs = moves + charged waits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ._jit import maybe_njit
from .tree_core import Instance, compute_demands, root_tree

__all__ = ["ValidationReport", "validate_upmt", "validate_mapf", "reconstruct_trajectories"]

_UPMT_REASONS = {
    1: "node id out of range",
    2: "endpoints not adjacent",
    3: "source node is empty",
    4: "destination node is occupied",
}

_MAPF_REASONS = {
    1: "node id out of range",
    2: "endpoints not adjacent",
    3: "source empty or double departure",
    4: "destination occupied by a waiting agent",
    5: "edge swap",
    6: "vertex conflict (two arrivals)",
    7: "negative timestep",
    8: "agent lost during replay",
}


@dataclass
class ValidationReport:
    """Replay outcome plus derived metrics (timed fields stay None for
    sequential plans)."""

    feasible: bool
    reason: Optional[str] = None
    failure_index: Optional[int] = None
    length: int = 0
    meets_lower_bound: Optional[bool] = None
    makespan: Optional[int] = None
    sum_of_costs: Optional[int] = None
    per_agent_costs: Optional[List[int]] = None
    move_count: Optional[int] = None
    wait_count: Optional[int] = None

    def as_text(self) -> str:
        if self.feasible:
            head = "plan is feasible"
        else:
            head = f"plan is infeasible: {self.reason}"
            if self.failure_index is not None:
                head += f" (at move index {self.failure_index})"
        lines = [head, f"  moves: {self.length}"]
        if self.meets_lower_bound is not None:
            lines.append(f"  matches demand bound: {self.meets_lower_bound}")
        if self.makespan is not None:
            lines.append(f"  makespan: {self.makespan}")
        if self.sum_of_costs is not None:
            lines.append(
                f"  sum of costs: {self.sum_of_costs}"
                f" ({self.move_count} moves + {self.wait_count} waits)"
            )
        return "\n".join(lines)

    def as_kv(self) -> str:
        pairs = [("feasible", int(self.feasible)), ("moves", self.length)]
        if not self.feasible:
            pairs.append(("reason", (self.reason or "").replace(" ", "_")))
            if self.failure_index is not None:
                pairs.append(("failure_index", self.failure_index))
        if self.meets_lower_bound is not None:
            pairs.append(("meets_lower_bound", int(self.meets_lower_bound)))
        if self.makespan is not None:
            pairs.append(("makespan", self.makespan))
        if self.sum_of_costs is not None:
            pairs.append(("soc", self.sum_of_costs))
            pairs.append(("wait_count", self.wait_count))
        return "\n".join(f"{k}={v}" for k, v in pairs)


# ---------------------------------------------------------------------------
# kernels


def _adjacent(indptr, sorted_adj, u, v):
    lo = indptr[u]
    hi = indptr[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        w = sorted_adj[mid]
        if w == v:
            return True
        if w < v:
            lo = mid + 1
        else:
            hi = mid
    return False


def _replay_seq(indptr, sorted_adj, occ, mu, mv):
    # Sequential replay; returns (code, failing index).
    n = occ.shape[0]
    for i in range(mu.shape[0]):
        u = mu[i]
        v = mv[i]
        if u < 0 or u >= n or v < 0 or v >= n:
            return 1, i
        if not _adjacent(indptr, sorted_adj, u, v):
            return 2, i
        if occ[u] == 0:
            return 3, i
        if occ[v] == 1:
            return 4, i
        occ[u] = 0
        occ[v] = 1
    return 0, -1


def _replay_timed(indptr, sorted_adj, occ, mu, mv, mt, dep_stamp, dep_to, arr_stamp):
    # Timestep-batched replay over moves pre-sorted by t (stable).
    # Returns (code, failing index).  Stamp arrays must start at -1.
    n = occ.shape[0]
    L = mu.shape[0]
    i = 0
    while i < L:
        t = mt[i]
        if t < 0:
            return 7, i
        j = i
        while j < L and mt[j] == t:
            j += 1
        stamp = i
        for m in range(i, j):
            u = mu[m]
            v = mv[m]
            if u < 0 or u >= n or v < 0 or v >= n:
                return 1, m
            if not _adjacent(indptr, sorted_adj, u, v):
                return 2, m
            if occ[u] == 0 or dep_stamp[u] == stamp:
                return 3, m
            dep_stamp[u] = stamp
            dep_to[u] = v
        for m in range(i, j):
            u = mu[m]
            v = mv[m]
            if dep_stamp[v] == stamp and dep_to[v] == u:
                return 5, m
            if arr_stamp[v] == stamp:
                return 6, m
            if occ[v] == 1 and dep_stamp[v] != stamp:
                return 4, m
            arr_stamp[v] = stamp
        for m in range(i, j):
            occ[mu[m]] = 0
        for m in range(i, j):
            occ[mv[m]] = 1
        i = j
    return 0, -1


def _agent_passes(agent_at, mu, mv, mt, agent_of, last_arrival, move_counts):
    # Assign each (already validated) move to the agent performing it and
    # track per-agent last arrival time + move count.  Batched per timestep
    # so convoys within one step resolve correctly.
    L = mu.shape[0]
    i = 0
    while i < L:
        t = mt[i]
        j = i
        while j < L and mt[j] == t:
            j += 1
        for m in range(i, j):
            a = agent_at[mu[m]]
            if a < 0:
                return 8, m
            agent_of[m] = a
        for m in range(i, j):
            agent_at[mu[m]] = -1
        for m in range(i, j):
            a = agent_of[m]
            agent_at[mv[m]] = a
            last_arrival[a] = t + 1
            move_counts[a] += 1
        i = j
    return 0, -1


_adjacent = maybe_njit(_adjacent)
_replay_seq = maybe_njit(_replay_seq)
_replay_timed = maybe_njit(_replay_timed)
_agent_passes = maybe_njit(_agent_passes)


# ---------------------------------------------------------------------------
# helpers


def _sorted_adjacency(tree) -> Tuple[np.ndarray, np.ndarray]:
    n = tree.n
    if n == 1:
        return np.zeros(2, np.int64), np.empty(0, np.int64)
    src = tree.edges.ravel()
    dst = tree.edges[:, ::-1].ravel()
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    take = np.lexsort((dst, src))
    return indptr, np.ascontiguousarray(dst[take])


def _occupancy(inst: Instance) -> np.ndarray:
    occ = np.zeros(inst.n, np.uint8)
    occ[inst.pebbles] = 1
    return occ


def _moves_array(plan, width: int) -> np.ndarray:
    # accepts Plan/TimedPlan objects as well as bare move sequences
    moves = getattr(plan, "moves", plan)
    return np.asarray(moves, dtype=np.int64).reshape(-1, width)


def _sorted_by_time(moves: np.ndarray) -> np.ndarray:
    if moves.shape[0] == 0:
        return moves
    take = np.argsort(moves[:, 2], kind="stable")
    return np.ascontiguousarray(moves[take])


# ---------------------------------------------------------------------------
# public validators


def validate_upmt(inst: Instance, plan) -> ValidationReport:
    """Replay a sequential plan; check every slide and the final occupancy."""
    moves = _moves_array(plan, 2)
    indptr, sadj = _sorted_adjacency(inst.tree)
    occ = _occupancy(inst)
    mu = np.ascontiguousarray(moves[:, 0])
    mv = np.ascontiguousarray(moves[:, 1])
    code, idx = _replay_seq(indptr, sadj, occ, mu, mv)
    length = int(moves.shape[0])
    if code != 0:
        return ValidationReport(
            feasible=False,
            reason=_UPMT_REASONS[code],
            failure_index=int(idx),
            length=length,
        )
    want = np.zeros(inst.n, np.uint8)
    want[inst.targets] = 1
    if not np.array_equal(occ, want):
        return ValidationReport(
            feasible=False, reason="final occupancy misses the targets", length=length
        )
    table = compute_demands(root_tree(inst.tree, 0), inst)
    return ValidationReport(
        feasible=True,
        length=length,
        meets_lower_bound=(length == table.total_imbalance()),
    )


def validate_mapf(inst: Instance, plan) -> ValidationReport:
    """Replay a timed plan timestep by timestep and derive its metrics."""
    moves = _sorted_by_time(_moves_array(plan, 3))
    indptr, sadj = _sorted_adjacency(inst.tree)
    occ = _occupancy(inst)
    n = inst.n
    mu = np.ascontiguousarray(moves[:, 0])
    mv = np.ascontiguousarray(moves[:, 1])
    mt = np.ascontiguousarray(moves[:, 2])
    length = int(moves.shape[0])
    dep_stamp = np.full(n, -1, np.int64)
    dep_to = np.full(n, -1, np.int64)
    arr_stamp = np.full(n, -1, np.int64)
    code, idx = _replay_timed(indptr, sadj, occ, mu, mv, mt, dep_stamp, dep_to, arr_stamp)
    if code != 0:
        return ValidationReport(
            feasible=False,
            reason=_MAPF_REASONS[code],
            failure_index=int(idx),
            length=length,
        )
    want = np.zeros(n, np.uint8)
    want[inst.targets] = 1
    if not np.array_equal(occ, want):
        return ValidationReport(
            feasible=False, reason="final occupancy misses the targets", length=length
        )
    code, idx, costs, move_counts, _ = _agent_metrics(inst, mu, mv, mt)
    if code != 0:
        return ValidationReport(
            feasible=False,
            reason=_MAPF_REASONS[code],
            failure_index=int(idx),
            length=length,
        )
    soc = int(costs.sum())
    return ValidationReport(
        feasible=True,
        length=length,
        makespan=int(mt[-1] + 1) if length else 0,
        sum_of_costs=soc,
        per_agent_costs=[int(c) for c in costs],
        move_count=length,
        wait_count=soc - length,
    )


def _agent_metrics(inst: Instance, mu, mv, mt):
    k = inst.k
    agent_at = np.full(inst.n, -1, np.int64)
    agent_at[inst.pebbles] = np.arange(k, dtype=np.int64)
    agent_of = np.full(mu.shape[0], -1, np.int64)
    last_arrival = np.zeros(k, np.int64)
    move_counts = np.zeros(k, np.int64)
    code, idx = _agent_passes(agent_at, mu, mv, mt, agent_of, last_arrival, move_counts)
    return code, idx, last_arrival, move_counts, agent_of


def reconstruct_trajectories(inst: Instance, plan) -> List[List[Tuple[int, int]]]:
    """Per-agent (node, time) paths for a conflict-free timed plan.

    Agents are numbered by sorted start node.  Each path starts at
    ``(start, 0)`` and appends one entry per move; waits do not add entries.
    Raises ValueError if the plan does not replay cleanly.
    """
    report = validate_mapf(inst, plan)
    if report.reason is not None and report.reason != "final occupancy misses the targets":
        raise ValueError(f"plan does not replay: {report.reason}")
    moves = _sorted_by_time(_moves_array(plan, 3))
    mu = np.ascontiguousarray(moves[:, 0])
    mv = np.ascontiguousarray(moves[:, 1])
    mt = np.ascontiguousarray(moves[:, 2])
    code, idx, _, _, agent_of = _agent_metrics(inst, mu, mv, mt)
    if code != 0:
        raise ValueError(f"plan does not replay: {_MAPF_REASONS[code]}")
    paths: List[List[Tuple[int, int]]] = [
        [(int(s), 0)] for s in inst.pebbles
    ]
    for m in range(moves.shape[0]):
        paths[int(agent_of[m])].append((int(mv[m]), int(mt[m]) + 1))
    return paths
