"""Bounded-suboptimal anonymous multi-agent path finding on trees.

Agents move simultaneously; a timed plan lists moves (u, v, t) meaning the
agent on u at time t is on v at time t+1.  The scheduler reuses the subtree
demand table and emits exactly sum(|d(u)|) moves, each agent's trajectory
being waits followed by nonstop motion, with makespan at most n - k and sum
of costs at most k(n - k).

Per node u the schedule is driven by a sorted list l(u) of times at which an
agent on u is ready to leave, plus a start offset s(u) that delays the
subtree of a deficit node so traffic merges without collisions.  Processing
order: handle negative-demand children first (they feed agents upward), then
dispatch u's own queue, then the remaining children.  All list storage is
flat: one front slot per node (the agent that starts there) plus an append
segment sized exactly from the initial demands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from ._jit import maybe_njit
from .errors import InfeasibleInstanceError, InstanceFormatError, KernelError
from .tree_core import DemandTable, Instance, RootedTree, compute_demands, root_tree
from .upmt import _ndigits, _write_int

__all__ = [
    "TimedMove",
    "TimedPlan",
    "SchedulerState",
    "new_scheduler",
    "solve_mapf",
    "solve_mapf_with_state",
    "process_node",
    "send_agent",
    "makespan",
    "sum_of_costs",
    "format_timed_plan",
    "parse_timed_plan",
]

_OK = 0
_ERR_OVERFLOW = 4
_ERR_REENTER = 5

_STATUS_TEXT = {
    _ERR_OVERFLOW: "schedule buffer overflow",
    _ERR_REENTER: "node scheduled twice",
}


class TimedMove(NamedTuple):
    u: int
    v: int
    t: int


@dataclass(eq=False)
class TimedPlan:
    """Timed moves as an (L, 3) array of (u, v, t), in emission order."""

    moves: np.ndarray

    def __len__(self) -> int:
        return int(self.moves.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimedPlan):
            return NotImplemented
        return np.array_equal(self.moves, other.moves)

    @property
    def move_count(self) -> int:
        return len(self)

    @property
    def makespan(self) -> int:
        if len(self) == 0:
            return 0
        return int(self.moves[:, 2].max()) + 1

    def __iter__(self) -> Iterator[TimedMove]:
        for u, v, t in self.moves:
            yield TimedMove(int(u), int(v), int(t))

    def to_list(self) -> List[Tuple[int, int, int]]:
        return [(int(u), int(v), int(t)) for u, v, t in self.moves]


# ---------------------------------------------------------------------------
# kernels


def _mapf_unlink(v, par, sign, head_neg, head_zero, head_pos, nxt, prv):
    if prv[v] == -1:
        if sign < 0:
            head_neg[par] = nxt[v]
        else:
            head_pos[par] = nxt[v]
    else:
        nxt[prv[v]] = nxt[v]
    if nxt[v] != -1:
        prv[nxt[v]] = prv[v]


def _mapf_push_zero(v, par, head_zero, nxt, prv):
    w = head_zero[par]
    nxt[v] = w
    prv[v] = -1
    if w != -1:
        prv[w] = v
    head_zero[par] = v


def _send_core(
    u, t, parent, head_neg, head_zero, head_pos, nxt, prv, d,
    l_indptr, l_vals, l_fill, mu, mv, mt, counters,
):
    # Dispatch the agent ready on u at time t.  Deficit node: send it to the
    # parent.  Otherwise: send it into the first surplus child, if any; with
    # no surplus child the agent has found its target and stays.
    if d[u] < 0:
        par = parent[u]
        pos = l_indptr[par] + l_fill[par]
        if pos >= l_indptr[par + 1]:
            return _ERR_OVERFLOW
        l_vals[pos] = t + 1
        l_fill[par] += 1
        m = counters[0]
        if m >= mu.shape[0]:
            return _ERR_OVERFLOW
        mu[m] = u
        mv[m] = par
        mt[m] = t
        counters[0] = m + 1
        d[u] += 1
        if d[u] == 0:
            _mapf_unlink(u, par, -1, head_neg, head_zero, head_pos, nxt, prv)
            _mapf_push_zero(u, par, head_zero, nxt, prv)
        return _OK
    v = head_pos[u]
    if v != -1:
        pos = l_indptr[v] + l_fill[v]
        if pos >= l_indptr[v + 1]:
            return _ERR_OVERFLOW
        l_vals[pos] = t + 1
        l_fill[v] += 1
        m = counters[0]
        if m >= mu.shape[0]:
            return _ERR_OVERFLOW
        mu[m] = u
        mv[m] = v
        mt[m] = t
        counters[0] = m + 1
        d[v] -= 1
        if d[v] == 0:
            _mapf_unlink(v, u, 1, head_neg, head_zero, head_pos, nxt, prv)
            _mapf_push_zero(v, u, head_zero, nxt, prv)
        return _OK
    return _OK


def _traffic_core(
    start, parent, child_indptr, child_list,
    head_neg, head_zero, head_pos, nxt, prv, d, agent, s, processed, entered,
    proc_order, l_front, l_indptr, l_vals, l_fill, mu, mv, mt, stack, counters,
):
    # Stack frames encode (node << 1 | fresh).  A fresh frame runs the entry
    # step; a stale frame resumes the deficit-children loop, whose head moves
    # on its own as children drain to zero demand.
    sp = 0
    stack[sp] = (start << 1) | 1
    sp += 1
    while sp > 0:
        sp -= 1
        code = stack[sp]
        u = code >> 1
        if code & 1:
            if entered[u] == 1:
                return _ERR_REENTER
            entered[u] = 1
            if agent[u] == 1:
                l_front[u] = s[u]
        v = head_neg[u]
        if v != -1:
            fl = l_fill[u]
            if fl > 0:
                maxl = l_vals[l_indptr[u] + fl - 1]
            elif l_front[u] >= 0:
                maxl = l_front[u]
            else:
                maxl = 0
            sv = s[u] - 1
            if maxl > sv:
                sv = maxl
            if sv < 0:
                sv = 0
            s[v] = sv
            stack[sp] = u << 1
            sp += 1
            stack[sp] = (v << 1) | 1
            sp += 1
            continue
        if l_front[u] >= 0:
            st = _send_core(
                u, l_front[u], parent, head_neg, head_zero, head_pos, nxt, prv,
                d, l_indptr, l_vals, l_fill, mu, mv, mt, counters,
            )
            if st != _OK:
                return st
        base = l_indptr[u]
        fl = l_fill[u]
        for i in range(fl):
            st = _send_core(
                u, l_vals[base + i], parent, head_neg, head_zero, head_pos, nxt, prv,
                d, l_indptr, l_vals, l_fill, mu, mv, mt, counters,
            )
            if st != _OK:
                return st
        processed[u] = 1
        proc_order[counters[1]] = u
        counters[1] += 1
        for idx in range(child_indptr[u + 1] - 1, child_indptr[u] - 1, -1):
            w = child_list[idx]
            if processed[w] == 0:
                stack[sp] = (w << 1) | 1
                sp += 1
    return _OK


def _render_triples(mu, mv, mt):
    L = mu.shape[0]
    total = 0
    for i in range(L):
        total += _ndigits(mu[i]) + _ndigits(mv[i]) + _ndigits(mt[i]) + 3
    out = np.empty(total, np.uint8)
    pos = 0
    for i in range(L):
        pos = _write_int(out, pos, mu[i])
        out[pos] = 32
        pos += 1
        pos = _write_int(out, pos, mv[i])
        out[pos] = 32
        pos += 1
        pos = _write_int(out, pos, mt[i])
        out[pos] = 10
        pos += 1
    return out


_mapf_unlink = maybe_njit(_mapf_unlink)
_mapf_push_zero = maybe_njit(_mapf_push_zero)
_send_core = maybe_njit(_send_core)
_traffic_core = maybe_njit(_traffic_core)
_render_triples = maybe_njit(_render_triples)


# ---------------------------------------------------------------------------
# scheduler state


@dataclass
class SchedulerState:
    """Everything the scheduler touches, flat arrays throughout.

    ``l(u)`` lives in three pieces: ``l_front[u]`` (the departure time of the
    agent that starts on u, -1 until its node is entered), and
    ``l_vals[l_indptr[u] : l_indptr[u] + l_fill[u]]`` (arrival times appended
    by neighbors).  Iterating front-then-segment is ascending time order.
    """

    rooted: RootedTree
    table: DemandTable
    d_init: np.ndarray
    agent: np.ndarray
    s: np.ndarray
    processed: np.ndarray
    entered: np.ndarray
    proc_order: np.ndarray
    l_front: np.ndarray
    l_indptr: np.ndarray
    l_vals: np.ndarray
    l_fill: np.ndarray
    mu: np.ndarray
    mv: np.ndarray
    mt: np.ndarray
    counters: np.ndarray
    stack: np.ndarray

    @property
    def move_count(self) -> int:
        return int(self.counters[0])

    def l_values(self, u: int) -> List[int]:
        out = []
        if self.l_front[u] >= 0:
            out.append(int(self.l_front[u]))
        base = self.l_indptr[u]
        out.extend(int(x) for x in self.l_vals[base : base + self.l_fill[u]])
        return out

    def processing_order(self) -> List[int]:
        return [int(u) for u in self.proc_order[: int(self.counters[1])]]

    def plan(self) -> TimedPlan:
        m = self.move_count
        return TimedPlan(np.stack([self.mu[:m], self.mv[:m], self.mt[:m]], axis=1))


def new_scheduler(inst: Instance, root: int = 0) -> SchedulerState:
    """Rooting, demands, and exactly-sized queue + plan buffers for ``inst``."""
    if inst.pebbles.size != inst.targets.size:
        raise InfeasibleInstanceError(
            f"{inst.pebbles.size} pebbles cannot cover {inst.targets.size} targets"
        )
    rooted = root_tree(inst.tree, root)
    table = compute_demands(rooted, inst)
    n = rooted.n
    d_init = table.d.copy()
    total = int(np.abs(d_init).sum())
    # capacity of each append segment: one slot per arrival that will ever
    # be queued at the node (up-moves from deficit children + down-moves in)
    caps = np.maximum(d_init, 0)
    if n > 1:
        nonroot = np.arange(n) != rooted.root
        deficits = np.minimum(d_init, 0)
        caps = caps + np.bincount(
            rooted.parent[nonroot], weights=-deficits[nonroot].astype(np.float64), minlength=n
        ).astype(np.int64)
    # l_indptr holds cumulative arrival counts, whose total is the plan
    # length; that can overflow int32 on adversarial instances, so keep it
    # (and the shifted node/flag codes on the stack) at int64.
    l_indptr = np.zeros(n + 1, np.int64)
    np.cumsum(caps, out=l_indptr[1:])
    return SchedulerState(
        rooted=rooted,
        table=table,
        d_init=d_init,
        agent=table.p.copy(),
        s=np.zeros(n, np.int32),
        processed=np.zeros(n, np.uint8),
        entered=np.zeros(n, np.uint8),
        proc_order=np.empty(n, np.int32),
        l_front=np.full(n, -1, np.int32),
        l_indptr=l_indptr,
        l_vals=np.empty(total, np.int32),
        l_fill=np.zeros(n, np.int32),
        mu=np.empty(total, np.int32),
        mv=np.empty(total, np.int32),
        mt=np.empty(total, np.int32),
        counters=np.zeros(2, np.int64),
        stack=np.empty(2 * n + 2, np.int64),
    )


# ---------------------------------------------------------------------------
# public operations


def _raise_kernel(status: int) -> None:
    raise KernelError(_STATUS_TEXT.get(status, f"status {status}"))


def process_node(state: SchedulerState, u: int) -> None:
    """Schedule the whole subtree of ``u``.

    Preconditions (checked): d(u) <= 0; a deficit node must have an empty
    queue, s(u) >= max l(parent(u)) and s(u) + 1 >= s(parent(u)); a balanced
    node has s(u) = 0; any queued times are sorted and >= 1.
    """
    r = state.rooted
    t = state.table
    d_u = int(t.d[u])
    assert d_u <= 0, "process_node needs d(u) <= 0"
    queued = state.l_values(u)
    assert queued == sorted(queued), "l(u) must be sorted"
    if d_u < 0:
        assert not queued, "deficit node must start with an empty queue"
        par = int(r.parent[u])
        if par >= 0:
            par_l = state.l_values(par)
            if par_l:
                assert state.s[u] >= max(par_l), "s(u) below parent queue maximum"
            assert state.s[u] + 1 >= state.s[par], "s(u) + 1 below parent start"
    else:
        assert state.s[u] == 0, "balanced node must have s(u) = 0"
        assert all(x >= 1 for x in queued), "queued arrivals start at time >= 1"
    st = _traffic_core(
        u, r.parent, r.child_indptr, r.child_list,
        r.head_neg, r.head_zero, r.head_pos, r.next_sibling, r.prev_sibling,
        t.d, state.agent, state.s, state.processed, state.entered,
        state.proc_order, state.l_front, state.l_indptr, state.l_vals, state.l_fill,
        state.mu, state.mv, state.mt, state.stack, state.counters,
    )
    if st != _OK:
        _raise_kernel(st)


def send_agent(state: SchedulerState, u: int, t: int) -> Optional[TimedMove]:
    """Dispatch the agent ready on ``u`` at time ``t``; None if it stays."""
    r = state.rooted
    before = state.move_count
    st = _send_core(
        u, t, r.parent, r.head_neg, r.head_zero, r.head_pos,
        r.next_sibling, r.prev_sibling, state.table.d,
        state.l_indptr, state.l_vals, state.l_fill,
        state.mu, state.mv, state.mt, state.counters,
    )
    if st != _OK:
        _raise_kernel(st)
    if state.move_count == before:
        return None
    m = before
    return TimedMove(int(state.mu[m]), int(state.mv[m]), int(state.mt[m]))


def solve_mapf(inst: Instance, root: int = 0) -> TimedPlan:
    """Timed plan with sum(|d(u)|) moves, makespan <= n - k, SOC <= k(n - k)."""
    plan, _ = solve_mapf_with_state(inst, root)
    return plan


def solve_mapf_with_state(inst: Instance, root: int = 0) -> Tuple[TimedPlan, SchedulerState]:
    """Like :func:`solve_mapf` but also returns the final scheduler state
    (queues, start offsets, processing order) for inspection."""
    state = new_scheduler(inst, root)
    total = state.mu.shape[0]
    process_node(state, root)
    if state.move_count != total:
        raise KernelError(
            f"emitted {state.move_count} moves, certificate says {total}"
        )
    return state.plan(), state


def makespan(plan: TimedPlan) -> int:
    """Timesteps until the last agent settles (0 for an empty plan)."""
    return plan.makespan


def sum_of_costs(plan: TimedPlan, inst: Instance) -> int:
    """Total last-arrival cost over agents (never-moving agents cost 0)."""
    from .validate import _agent_metrics, _moves_array, _sorted_by_time

    moves = _sorted_by_time(_moves_array(plan, 3))
    mu = np.ascontiguousarray(moves[:, 0])
    mv = np.ascontiguousarray(moves[:, 1])
    mt = np.ascontiguousarray(moves[:, 2])
    code, idx, costs, _, _ = _agent_metrics(inst, mu, mv, mt)
    if code != 0:
        raise ValueError(f"plan does not replay against this instance (move {idx})")
    return int(costs.sum())


# ---------------------------------------------------------------------------
# timed plan text format:
#   "# moves=<L> makespan=<M> soc=<S>", then "u v t" rows, t nondecreasing


def format_timed_plan(plan: TimedPlan, inst: Instance) -> str:
    moves = np.asarray(plan.moves, dtype=np.int64).reshape(-1, 3)
    if moves.shape[0]:
        take = np.argsort(moves[:, 2], kind="stable")
        moves = moves[take]
    soc = sum_of_costs(plan, inst)
    header = f"# moves={moves.shape[0]} makespan={plan.makespan} soc={soc}\n"
    if moves.shape[0] == 0:
        return header
    body = _render_triples(
        np.ascontiguousarray(moves[:, 0]),
        np.ascontiguousarray(moves[:, 1]),
        np.ascontiguousarray(moves[:, 2]),
    )
    return header + body.tobytes().decode("ascii")


def parse_timed_plan(text) -> TimedPlan:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 3:
            raise InstanceFormatError(f"line {lineno}: timed rows are 'u v t'")
        try:
            rows.append((int(toks[0]), int(toks[1]), int(toks[2])))
        except ValueError:
            raise InstanceFormatError(f"line {lineno}: non-integer token") from None
    return TimedPlan(np.array(rows, np.int64).reshape(-1, 3))
