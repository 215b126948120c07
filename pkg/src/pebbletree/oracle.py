"""Independent optimality oracles.

Three ways to cross-check the solvers, none of which share logic with them:

* :func:`oracle_opt_bfs`       breadth-first search over pebble
  configurations (bitmasks), exact minimum move count;
* :func:`oracle_opt_matching`  min-cost perfect matching between pebbles and
  targets under tree distance (a dense O(k^3) assignment solve);
* :func:`oracle_mapf_optimal`  exact optimal makespan or sum-of-costs for the
  simultaneous-motion problem, by BFS / A* over joint agent configurations,
  optionally restricted to plans that never use an edge in both directions.

:func:`verify_all_small_trees` runs solver + both sequential oracles +
replay validation over every labeled tree up to a size bound, entirely in
kernels, so exhaustive sweeps stay in the tens of seconds.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ._jit import maybe_njit
from .errors import BudgetExceededError, KernelError
from .tree_core import (
    Instance,
    Tree,
    _accumulate_to_parent,
    _build_sign_lists,
    enumerate_labeled_trees,
    root_tree,
)
from .upmt import _balance_core
from .validate import _replay_seq, _sorted_adjacency

__all__ = [
    "tree_distance",
    "oracle_opt_bfs",
    "oracle_opt_matching",
    "oracle_mapf_optimal",
    "SweepResult",
    "verify_all_small_trees",
]

DEFAULT_BFS_CONFIGS = 1_000_000
DEFAULT_MAPF_EXPANSIONS = 5_000_000


# ---------------------------------------------------------------------------
# kernels


def _dist_rows(indptr, adj, sources, out):
    # BFS distances from each source node; out is (len(sources), n).
    n = indptr.shape[0] - 1
    queue = np.empty(n, np.int64)
    for si in range(sources.shape[0]):
        row = out[si]
        for i in range(n):
            row[i] = -1
        s = sources[si]
        row[s] = 0
        queue[0] = s
        qh = 0
        qt = 1
        while qh < qt:
            u = queue[qh]
            qh += 1
            du = row[u]
            for idx in range(indptr[u], indptr[u + 1]):
                w = adj[idx]
                if row[w] < 0:
                    row[w] = du + 1
                    queue[qt] = w
                    qt += 1


def _config_bfs(indptr, adj, n, start_mask, dist, queue):
    # BFS over k-subsets of nodes encoded as bitmasks; one legal transition
    # slides one pebble along one edge into an empty node.  dist must be -1
    # at every reachable entry; returns the number of visited masks so the
    # caller can cheaply reset them.
    dist[start_mask] = 0
    queue[0] = start_mask
    qh = 0
    qt = 1
    while qh < qt:
        m = queue[qh]
        qh += 1
        dm = dist[m]
        for u in range(n):
            if (m >> u) & 1:
                for idx in range(indptr[u], indptr[u + 1]):
                    v = adj[idx]
                    if ((m >> v) & 1) == 0:
                        m2 = (m ^ (np.int64(1) << u)) | (np.int64(1) << v)
                        if dist[m2] < 0:
                            dist[m2] = dm + 1
                            queue[qt] = m2
                            qt += 1
    return qt


def _hungarian_core(a, k, pot_u, pot_v, match, way, minv, used):
    # Dense assignment (potentials + shortest augmenting column), 1-based
    # scratch arrays of length k + 1.  Returns the minimum total cost.
    INF = np.int64(1) << 60
    for j in range(k + 1):
        pot_u[j] = 0
        pot_v[j] = 0
        match[j] = 0
        way[j] = 0
    for i in range(1, k + 1):
        match[0] = i
        j0 = 0
        for j in range(k + 1):
            minv[j] = INF
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = match[j0]
            delta = INF
            j1 = 0
            for j in range(1, k + 1):
                if used[j] == 0:
                    cur = a[i0 - 1, j - 1] - pot_u[i0] - pot_v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(k + 1):
                if used[j] == 1:
                    pot_u[match[j]] += delta
                    pot_v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    total = np.int64(0)
    for j in range(1, k + 1):
        total += a[match[j] - 1, j - 1]
    return total


def _sweep_tree(
    n, indptr, adj, parent, order, child_indptr, child_list,
    sadj_indptr, sadj, ks,
    pair_dist, cfg_dist, cfg_queue,
    d, p, b, occ, head_neg, head_zero, head_pos, nxt, prv, chain, stack,
    mu, mv, cost, pnodes, bnodes,
    pot_u, pot_v, match, way, minv, used, counters, fail_out,
):
    # For one tree: over every k in ks and every ordered pair of k-subsets
    # (P, B), check  solver length == config-BFS == matching == sum|d|  and
    # that the emitted plan replays to exactly B.  Returns (checked, failed).
    _dist_rows(indptr, adj, np.arange(n), pair_dist)
    checked = 0
    failed = 0
    for ki in range(ks.shape[0]):
        k = ks[ki]
        if k < 1 or k > n:
            continue
        first = (np.int64(1) << k) - 1
        last = first << (n - k)
        pm = first
        while True:
            visited = _config_bfs(indptr, adj, n, pm, cfg_dist, cfg_queue)
            kk = 0
            for i in range(n):
                if (pm >> i) & 1:
                    pnodes[kk] = i
                    kk += 1
            bm = first
            while True:
                opt_bfs = cfg_dist[bm]
                kk = 0
                for i in range(n):
                    if (bm >> i) & 1:
                        bnodes[kk] = i
                        kk += 1
                lb = np.int64(0)
                for i in range(n):
                    pb = np.int64((pm >> i) & 1)
                    bb = np.int64((bm >> i) & 1)
                    p[i] = pb
                    b[i] = bb
                    d[i] = bb - pb
                _accumulate_to_parent(order, parent, d)
                for i in range(n):
                    lb += abs(d[i])
                for i in range(k):
                    for j in range(k):
                        cost[i, j] = pair_dist[pnodes[i], bnodes[j]]
                opt_match = _hungarian_core(
                    cost[:k, :k], k, pot_u, pot_v, match, way, minv, used
                )
                _build_sign_lists(
                    child_indptr, child_list, d,
                    head_neg, head_zero, head_pos, nxt, prv,
                )
                counters[0] = 0
                st = _balance_core(
                    order[0], parent, child_indptr, child_list,
                    head_neg, head_zero, head_pos, nxt, prv, d, p,
                    chain, stack, mu, mv, counters,
                )
                length = counters[0]
                ok = st == 0 and opt_bfs == lb and opt_match == lb and length == lb
                if ok:
                    for i in range(n):
                        occ[i] = (pm >> i) & 1
                    code, _ = _replay_seq(sadj_indptr, sadj, occ, mu[:length], mv[:length])
                    if code != 0:
                        ok = False
                    else:
                        for i in range(n):
                            if occ[i] != b[i]:
                                ok = False
                checked += 1
                if not ok:
                    if failed == 0:
                        fail_out[0] = k
                        fail_out[1] = pm
                        fail_out[2] = bm
                    failed += 1
                if bm == last:
                    break
                c = bm & (-bm)
                r = bm + c
                bm = r | (((bm ^ r) >> 2) // c)
            for qi in range(visited):
                cfg_dist[cfg_queue[qi]] = -1
            if pm == last:
                break
            c = pm & (-pm)
            r = pm + c
            pm = r | (((pm ^ r) >> 2) // c)
    return checked, failed


_dist_rows = maybe_njit(_dist_rows)
_config_bfs = maybe_njit(_config_bfs)
_hungarian_core = maybe_njit(_hungarian_core)
_sweep_tree = maybe_njit(_sweep_tree)


# ---------------------------------------------------------------------------
# sequential-objective oracles


def tree_distance(tree: Tree, u: int, v: int) -> int:
    """Number of edges on the unique u-v path."""
    n = tree.n
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError("node out of range")
    if u == v:
        return 0
    out = np.empty((1, n), np.int64)
    _dist_rows(tree.adj_indptr, tree.adj_indices, np.array([u], np.int64), out)
    return int(out[0, v])


def _masks(inst: Instance) -> Tuple[int, int]:
    pm = 0
    for u in inst.pebbles:
        pm |= 1 << int(u)
    bm = 0
    for u in inst.targets:
        bm |= 1 << int(u)
    return pm, bm


def oracle_opt_bfs(inst: Instance, max_configs: int = DEFAULT_BFS_CONFIGS) -> int:
    """Exact minimum number of moves, by BFS over pebble configurations.

    Refuses instances whose C(n, k) configuration count exceeds
    ``max_configs`` (anything with n <= 12 is always allowed; it cannot).
    """
    n, k = inst.n, inst.k
    states = math.comb(n, k)
    if n > 12 and states > max_configs:
        raise BudgetExceededError(
            f"C({n},{k}) = {states} configurations exceeds the budget {max_configs}"
        )
    pm, bm = _masks(inst)
    if pm == bm:
        return 0
    if n <= 20:
        dist = np.full(1 << n, -1, np.int64)
        queue = np.empty(1 << n, np.int64)
        _config_bfs(inst.tree.adj_indptr, inst.tree.adj_indices, n, pm, dist, queue)
        res = int(dist[bm])
        if res < 0:
            raise KernelError("target configuration unreachable")
        return res
    # big-n fallback: python-int masks, early exit
    nbrs = [inst.tree.neighbors(u).tolist() for u in range(n)]
    dist: Dict[int, int] = {pm: 0}
    frontier = [pm]
    while frontier:
        nxt = []
        for m in frontier:
            dm = dist[m]
            mm = m
            while mm:
                low = mm & (-mm)
                u = low.bit_length() - 1
                mm ^= low
                for v in nbrs[u]:
                    if not (m >> v) & 1:
                        m2 = (m ^ (1 << u)) | (1 << v)
                        if m2 not in dist:
                            if m2 == bm:
                                return dm + 1
                            dist[m2] = dm + 1
                            nxt.append(m2)
        frontier = nxt
    raise KernelError("target configuration unreachable")


def oracle_opt_matching(inst: Instance) -> int:
    """Minimum total tree distance of a perfect pebble-target matching.

    For unlabeled pebbles on a tree this matches the exact optimum; it is
    computed here with an independent assignment solver, not with demands.
    """
    k = inst.k
    if k == 0:
        return 0
    n = inst.n
    dist = np.empty((k, n), np.int64)
    _dist_rows(inst.tree.adj_indptr, inst.tree.adj_indices, inst.pebbles, dist)
    cost = np.ascontiguousarray(dist[:, inst.targets])
    return int(
        _hungarian_core(
            cost, k,
            np.zeros(k + 1, np.int64), np.zeros(k + 1, np.int64),
            np.zeros(k + 1, np.int64), np.zeros(k + 1, np.int64),
            np.zeros(k + 1, np.int64), np.zeros(k + 1, np.uint8),
        )
    )


# ---------------------------------------------------------------------------
# simultaneous-objective oracle


def oracle_mapf_optimal(
    inst: Instance,
    objective: str = "makespan",
    *,
    allow_bidirectional: bool = True,
    max_expansions: int = DEFAULT_MAPF_EXPANSIONS,
) -> int:
    """Exact optimal makespan or sum of costs for simultaneous motion.

    Joint-configuration search: BFS for makespan, A* (admissible, consistent
    heuristic: each unsettled agent still owes its distance to the nearest
    target) for sum of costs.  Cost model: an agent that never moves costs 0,
    any other agent costs the timestep of its final arrival.  With
    ``allow_bidirectional=False`` plans may use each edge in one direction
    only, tracked per edge in the search state.

    Raises :class:`BudgetExceededError` after ``max_expansions`` expansions.
    """
    if objective not in ("makespan", "soc"):
        raise ValueError(f"unknown objective {objective!r}")
    n, k = inst.n, inst.k
    pm, bm = _masks(inst)
    if pm == bm:
        return 0
    tree = inst.tree
    nbrs: List[List[int]] = [tree.neighbors(u).tolist() for u in range(n)]
    eid: Dict[Tuple[int, int], int] = {}
    for i, (a, c) in enumerate((int(x), int(y)) for x, y in tree.edges):
        a, c = (a, c) if a < c else (c, a)
        eid[(a, c)] = i

    options_cache: Dict[int, List[Tuple[int, int, int, int]]] = {}

    def options(occ: int) -> List[Tuple[int, int, int, int]]:
        # all legal simultaneous move sets from occupancy `occ`, as
        # (source_mask, new_occ, fwd_edges, bwd_edges); waits are implicit,
        # all-wait is dropped.
        got = options_cache.get(occ)
        if got is not None:
            return got
        nodes = [u for u in range(n) if (occ >> u) & 1]
        out: List[Tuple[int, int, int, int]] = []
        dest_of: Dict[int, int] = {}

        def rec(i: int, src: int, dst: int, fwd: int, bwd: int) -> None:
            if i == len(nodes):
                if src:
                    for u, v in dest_of.items():
                        if (occ >> v) & 1 and not (src >> v) & 1:
                            return
                    out.append((src, (occ & ~src) | dst, fwd, bwd))
                return
            u = nodes[i]
            rec(i + 1, src, dst, fwd, bwd)  # u waits
            for v in nbrs[u]:
                if (dst >> v) & 1:
                    continue
                if dest_of.get(v) == u:
                    continue  # swap along one edge
                a, c = (u, v) if u < v else (v, u)
                e = eid[(a, c)]
                nf, nb = (fwd | (1 << e), bwd) if u < v else (fwd, bwd | (1 << e))
                dest_of[u] = v
                rec(i + 1, src | (1 << u), dst | (1 << v), nf, nb)
                del dest_of[u]

        rec(0, 0, 0, 0, 0)
        options_cache[occ] = out
        return out

    unidir = not allow_bidirectional
    budget = [0]

    def spend() -> None:
        budget[0] += 1
        if budget[0] > max_expansions:
            raise BudgetExceededError(
                f"simultaneous-motion oracle exceeded {max_expansions} expansions"
            )

    if objective == "makespan":
        start = (pm, 0, 0)
        visited = {start}
        frontier = [start]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for occ, fwd, bwd in frontier:
                spend()
                for src, occ2, f2, b2 in options(occ):
                    if unidir:
                        if (f2 & bwd) or (b2 & fwd):
                            continue
                        state = (occ2, fwd | f2, bwd | b2)
                    else:
                        state = (occ2, 0, 0)
                    if state in visited:
                        continue
                    if occ2 == bm:
                        return depth
                    visited.add(state)
                    nxt.append(state)
            frontier = nxt
        raise KernelError("makespan search exhausted without reaching the targets")

    # sum of costs: states (occ, settled, fwd, bwd); settling is free and
    # happens before a step, each step then charges one per unsettled agent
    mind = np.empty((k, n), np.int64)
    _dist_rows(tree.adj_indptr, tree.adj_indices, inst.targets, mind)
    near = mind.min(axis=0)

    def h(occ: int, settled: int) -> int:
        rem = occ & ~settled
        tot = 0
        while rem:
            low = rem & (-rem)
            tot += int(near[low.bit_length() - 1])
            rem ^= low
        return tot

    start4 = (pm, 0, 0, 0)
    best: Dict[Tuple[int, int, int, int], int] = {start4: 0}
    pq: List[Tuple[int, int, int, Tuple[int, int, int, int]]] = [(h(pm, 0), 0, 0, start4)]
    tick = 0
    while pq:
        f, g, _, state = heapq.heappop(pq)
        if best.get(state, -1) != g:
            continue
        occ, settled, fwd, bwd = state
        if occ == bm:
            return g
        spend()
        cands = occ & bm & ~settled
        sub = cands
        while True:
            f1 = settled | sub
            movers = k - bin(f1).count("1")
            if movers > 0:
                for src, occ2, f2, b2 in options(occ):
                    if src & f1:
                        continue
                    if unidir:
                        if (f2 & bwd) or (b2 & fwd):
                            continue
                        ns = (occ2, f1, fwd | f2, bwd | b2)
                    else:
                        ns = (occ2, f1, 0, 0)
                    g2 = g + movers
                    old = best.get(ns)
                    if old is not None and old <= g2:
                        continue
                    best[ns] = g2
                    tick += 1
                    heapq.heappush(pq, (g2 + h(occ2, f1), g2, tick, ns))
            if sub == 0:
                break
            sub = (sub - 1) & cands
    raise KernelError("cost search exhausted without reaching the targets")


# ---------------------------------------------------------------------------
# exhaustive small-instance verification


@dataclass
class SweepResult:
    """Outcome of an exhaustive all-trees sweep."""

    trees: int
    instances: int
    failures: int
    first_failure: Optional[Tuple[int, int, int, int]] = None  # (n, k, P mask, B mask)

    @property
    def ok(self) -> bool:
        return self.failures == 0


def verify_all_small_trees(max_n: int = 7, ks: Tuple[int, ...] = (1, 2, 3)) -> SweepResult:
    """Exhaustively check solver vs both oracles vs the demand certificate.

    Every labeled tree with 1..max_n nodes, every k in ``ks`` (clipped to
    k <= n), every ordered pair of k-subsets as pebbles/targets.  Each
    emitted plan is also replayed.  18,249 trees and ~29M instances at the
    defaults; requires the numba backend to be practical.
    """
    trees = 0
    instances = 0
    failures = 0
    first: Optional[Tuple[int, int, int, int]] = None
    for n in range(1, max_n + 1):
        ks_n = np.array(sorted({k for k in ks if 1 <= k <= n}), np.int64)
        if ks_n.size == 0:
            continue
        kmax = int(ks_n.max())
        pair_dist = np.empty((n, n), np.int64)
        cfg_dist = np.full(1 << n, -1, np.int64)
        cfg_queue = np.empty(1 << n, np.int64)
        # dtypes mirror the production solver arrays so the shared kernels
        # compile once
        d = np.empty(n, np.int32)
        p = np.empty(n, np.uint8)
        b = np.empty(n, np.uint8)
        occ = np.empty(n, np.uint8)
        head_neg = np.empty(n, np.int32)
        head_zero = np.empty(n, np.int32)
        head_pos = np.empty(n, np.int32)
        nxt = np.empty(n, np.int32)
        prv = np.empty(n, np.int32)
        chain = np.empty(n + 1, np.int32)
        stack = np.empty(n + 1, np.int32)
        mu = np.empty(2 * n * n + 2, np.int32)
        mv = np.empty(2 * n * n + 2, np.int32)
        cost = np.empty((kmax, kmax), np.int64)
        pnodes = np.empty(kmax, np.int64)
        bnodes = np.empty(kmax, np.int64)
        pot_u = np.empty(kmax + 1, np.int64)
        pot_v = np.empty(kmax + 1, np.int64)
        match = np.empty(kmax + 1, np.int64)
        way = np.empty(kmax + 1, np.int64)
        minv = np.empty(kmax + 1, np.int64)
        used = np.empty(kmax + 1, np.uint8)
        counters = np.zeros(2, np.int64)
        fail_out = np.zeros(3, np.int64)
        for tree in enumerate_labeled_trees(n):
            rooted = root_tree(tree, 0)
            sadj_indptr, sadj = _sorted_adjacency(tree)
            checked, failed = _sweep_tree(
                n, tree.adj_indptr, tree.adj_indices,
                rooted.parent, rooted.order, rooted.child_indptr, rooted.child_list,
                sadj_indptr, sadj, ks_n,
                pair_dist, cfg_dist, cfg_queue,
                d, p, b, occ, head_neg, head_zero, head_pos, nxt, prv, chain, stack,
                mu, mv, cost, pnodes, bnodes,
                pot_u, pot_v, match, way, minv, used, counters, fail_out,
            )
            trees += 1
            instances += int(checked)
            if failed:
                failures += int(failed)
                if first is None:
                    first = (n, int(fail_out[0]), int(fail_out[1]), int(fail_out[2]))
        del pair_dist, cfg_dist, cfg_queue
    return SweepResult(trees=trees, instances=instances, failures=failures, first_failure=first)
