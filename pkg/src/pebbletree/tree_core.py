"""Tree topology, rooting, demand computation, instance I/O and generators.

Nodes are dense integers ``0..n-1``.  A :class:`Tree` stores its edge list
plus a CSR adjacency whose per-node neighbor order is the order edges appear
in the input; rooting keeps that order for children, which pins down every
tie-break downstream.  :func:`compute_demands` fills the per-node demand
``d(u) = (#targets in subtree of u) - (#pebbles in subtree of u)`` and threads
each node's children into three doubly linked lists (negative / zero /
positive demand) that the solvers update in O(1) per move.

Heavy loops run through the numba backend (see ``_jit``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Tuple

import numpy as np

from ._jit import maybe_njit
from .errors import InstanceFormatError, InvalidTreeError

__all__ = [
    "Tree",
    "RootedTree",
    "Instance",
    "DemandTable",
    "path_tree",
    "random_labeled_tree",
    "random_instance",
    "enumerate_labeled_trees",
    "root_tree",
    "compute_demands",
    "subtree_sizes",
    "parse_instance",
    "format_instance",
]


# ---------------------------------------------------------------------------
# kernels


def _decode_prufer_seq(n, seq, edges):
    # Classic O(n) decode: repeatedly attach the smallest-labeled leaf.
    degree = np.ones(n, np.int64)
    for i in range(n - 2):
        degree[seq[i]] += 1
    ptr = 0
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    for i in range(n - 2):
        v = seq[i]
        edges[i, 0] = leaf
        edges[i, 1] = v
        degree[v] -= 1
        if degree[v] == 1 and v < ptr:
            leaf = v
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    edges[n - 2, 0] = leaf
    edges[n - 2, 1] = n - 1


def _bfs_tree(indptr, adj, root, parent, order):
    # Fills parent (-1 at root) and a root-first visit order; returns the
    # number of reached nodes so callers can detect disconnected inputs.
    parent[root] = -1
    order[0] = root
    head = 0
    tail = 1
    while head < tail:
        u = order[head]
        head += 1
        for idx in range(indptr[u], indptr[u + 1]):
            w = adj[idx]
            if parent[w] == -2:
                parent[w] = u
                order[tail] = w
                tail += 1
    return tail


def _children_csr(indptr, adj, parent, child_indptr, child_list):
    n = parent.shape[0]
    child_indptr[0] = 0
    for u in range(n):
        deg = indptr[u + 1] - indptr[u]
        if parent[u] >= 0:
            deg -= 1
        child_indptr[u + 1] = child_indptr[u] + deg
    for u in range(n):
        pos = child_indptr[u]
        for idx in range(indptr[u], indptr[u + 1]):
            w = adj[idx]
            if parent[w] == u:
                child_list[pos] = w
                pos += 1


def _accumulate_to_parent(order, parent, val):
    # Postorder sum: after this, val[u] is the total over the subtree of u.
    for i in range(order.shape[0] - 1, 0, -1):
        u = order[i]
        val[parent[u]] += val[u]


def _build_sign_lists(child_indptr, child_list, d, head_neg, head_zero, head_pos, nxt, prv):
    n = head_neg.shape[0]
    for u in range(n):
        head_neg[u] = -1
        head_zero[u] = -1
        head_pos[u] = -1
        nxt[u] = -1
        prv[u] = -1
    for u in range(n):
        tail_n = -1
        tail_z = -1
        tail_p = -1
        for idx in range(child_indptr[u], child_indptr[u + 1]):
            v = child_list[idx]
            dv = d[v]
            if dv < 0:
                if tail_n == -1:
                    head_neg[u] = v
                else:
                    nxt[tail_n] = v
                prv[v] = tail_n
                tail_n = v
            elif dv > 0:
                if tail_p == -1:
                    head_pos[u] = v
                else:
                    nxt[tail_p] = v
                prv[v] = tail_p
                tail_p = v
            else:
                if tail_z == -1:
                    head_zero[u] = v
                else:
                    nxt[tail_z] = v
                prv[v] = tail_z
                tail_z = v


_decode_prufer_seq = maybe_njit(_decode_prufer_seq)
_bfs_tree = maybe_njit(_bfs_tree)
_children_csr = maybe_njit(_children_csr)
_accumulate_to_parent = maybe_njit(_accumulate_to_parent)
_build_sign_lists = maybe_njit(_build_sign_lists)


# ---------------------------------------------------------------------------
# core types


class Tree:
    """Undirected tree on nodes ``0..n-1``.

    Construction validates the edge list: exactly ``n - 1`` edges, ids in
    range, no self loops or duplicates, connected.  ``adj_indptr`` /
    ``adj_indices`` form a CSR adjacency; each node's neighbors appear in
    input edge order, and that order is what rooting inherits.
    """

    __slots__ = ("n", "edges", "adj_indptr", "adj_indices")

    def __init__(self, n: int, edges) -> None:
        n = int(n)
        if n < 1:
            raise InvalidTreeError("a tree needs at least one node")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.shape[0] != n - 1:
            raise InvalidTreeError(
                f"expected {n - 1} edges for {n} nodes, got {edges.shape[0]}"
            )
        if n > 1:
            if edges.min() < 0 or edges.max() >= n:
                raise InvalidTreeError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise InvalidTreeError("self loop in edge list")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            key = lo * n + hi
            key.sort()
            if np.any(key[1:] == key[:-1]):
                raise InvalidTreeError("duplicate edge in edge list")
        self.n = n
        self.edges = edges
        self.adj_indptr, self.adj_indices = _adjacency_csr(n, edges)
        if n > 1:
            parent = np.full(n, -2, np.int32)
            order = np.empty(n, np.int32)
            reached = _bfs_tree(self.adj_indptr, self.adj_indices, 0, parent, order)
            if reached != n:
                raise InvalidTreeError("edge list is disconnected (or cyclic)")
        for arr in (self.edges, self.adj_indptr, self.adj_indices):
            arr.setflags(write=False)

    def neighbors(self, u: int) -> np.ndarray:
        return self.adj_indices[self.adj_indptr[u] : self.adj_indptr[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.adj_indptr[u + 1] - self.adj_indptr[u])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tree)
            and self.n == other.n
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):  # pragma: no cover - trees are not meant as dict keys
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self) -> str:
        return f"Tree(n={self.n})"


def _adjacency_csr(n: int, edges: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # int32 throughout: node ids and CSR offsets both fit, and the solvers are
    # memory bound at large n.
    if n == 1 or edges.shape[0] == 0:
        return np.zeros(n + 1, np.int32), np.empty(0, np.int32)
    src = edges.ravel()
    dst = edges[:, ::-1].ravel()
    indptr = np.zeros(n + 1, np.int32)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    take = np.argsort(src, kind="stable")
    return indptr, dst[take].astype(np.int32)


class RootedTree:
    """A tree plus a root: parent pointers, a root-first visit order, and the
    children of every node in rooting order.

    ``head_neg`` / ``head_zero`` / ``head_pos`` with ``next_sibling`` /
    ``prev_sibling`` hold each node's children partitioned by demand sign.
    They start empty and are populated by :func:`compute_demands`; the solver
    modules then mutate them in place as pebbles move.
    """

    __slots__ = (
        "tree",
        "root",
        "parent",
        "order",
        "child_indptr",
        "child_list",
        "head_neg",
        "head_zero",
        "head_pos",
        "next_sibling",
        "prev_sibling",
        "lists_ready",
    )

    def __init__(self, tree: Tree, root: int) -> None:
        n = tree.n
        self.tree = tree
        self.root = root
        self.parent = np.full(n, -2, np.int32)
        self.order = np.empty(n, np.int32)
        _bfs_tree(tree.adj_indptr, tree.adj_indices, root, self.parent, self.order)
        self.child_indptr = np.empty(n + 1, np.int32)
        self.child_list = np.empty(max(n - 1, 0), np.int32)
        _children_csr(
            tree.adj_indptr, tree.adj_indices, self.parent, self.child_indptr, self.child_list
        )
        self.head_neg = np.full(n, -1, np.int32)
        self.head_zero = np.full(n, -1, np.int32)
        self.head_pos = np.full(n, -1, np.int32)
        self.next_sibling = np.full(n, -1, np.int32)
        self.prev_sibling = np.full(n, -1, np.int32)
        self.lists_ready = False

    @property
    def n(self) -> int:
        return self.tree.n

    def children(self, u: int) -> np.ndarray:
        return self.child_list[self.child_indptr[u] : self.child_indptr[u + 1]]

    def _walk(self, head: np.ndarray, u: int) -> List[int]:
        out: List[int] = []
        v = head[u]
        while v != -1:
            out.append(int(v))
            v = self.next_sibling[v]
        return out

    def neg_children(self, u: int) -> List[int]:
        return self._walk(self.head_neg, u)

    def zero_children(self, u: int) -> List[int]:
        return self._walk(self.head_zero, u)

    def pos_children(self, u: int) -> List[int]:
        return self._walk(self.head_pos, u)

    def __repr__(self) -> str:
        return f"RootedTree(n={self.n}, root={self.root})"


class Instance:
    """A tree with ``k`` pebbles (``pebbles``) and ``k`` targets (``targets``).

    Both sets are stored as sorted unique node arrays.  Pebbles and targets
    may overlap in any way; a node can be both.
    """

    __slots__ = ("tree", "pebbles", "targets")

    def __init__(self, tree: Tree, pebbles, targets) -> None:
        self.tree = tree
        self.pebbles = _node_set(tree.n, pebbles, "pebble")
        self.targets = _node_set(tree.n, targets, "target")
        if self.pebbles.size != self.targets.size:
            raise InstanceFormatError(
                f"{self.pebbles.size} pebbles vs {self.targets.size} targets"
            )

    @property
    def n(self) -> int:
        return self.tree.n

    @property
    def k(self) -> int:
        return int(self.pebbles.size)

    def __repr__(self) -> str:
        return f"Instance(n={self.n}, k={self.k})"


def _node_set(n: int, nodes, what: str) -> np.ndarray:
    arr = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if arr.size:
        if arr.min() < 0 or arr.max() >= n:
            raise InstanceFormatError(f"{what} node out of range")
    arr = np.sort(arr)
    if arr.size > 1 and np.any(arr[1:] == arr[:-1]):
        raise InstanceFormatError(f"duplicate {what} node")
    arr.setflags(write=False)
    return arr


@dataclass
class DemandTable:
    """Per-node demand ``d`` plus occupancy bit ``p`` and target bit ``b``.

    ``d[u]`` counts targets minus pebbles within the subtree of ``u`` for the
    rooting it was computed against.  Solvers mutate ``d`` and ``p`` in place;
    ``b`` stays fixed.
    """

    d: np.ndarray
    p: np.ndarray
    b: np.ndarray

    def total_imbalance(self) -> int:
        return int(np.abs(self.d).sum())

    def copy(self) -> "DemandTable":
        return DemandTable(self.d.copy(), self.p.copy(), self.b.copy())


# ---------------------------------------------------------------------------
# rooting and demands


def root_tree(tree: Tree, root: int = 0) -> RootedTree:
    """Root ``tree`` at ``root``; children keep the adjacency (input) order."""
    if not 0 <= root < tree.n:
        raise ValueError(f"root {root} out of range for n={tree.n}")
    return RootedTree(tree, root)


def compute_demands(rooted: RootedTree, inst: Instance) -> DemandTable:
    """Compute subtree demands for ``inst`` and thread the sign lists.

    The instance must be over the same tree the rooting was built from.
    ``d(root)`` is zero whenever pebbles and targets are equinumerous, which
    :class:`Instance` already guarantees.
    """
    if inst.tree is not rooted.tree and inst.tree != rooted.tree:
        raise ValueError("instance and rooting disagree on the tree")
    n = rooted.n
    p = np.zeros(n, np.uint8)
    b = np.zeros(n, np.uint8)
    p[inst.pebbles] = 1
    b[inst.targets] = 1
    d = b.astype(np.int32) - p.astype(np.int32)
    _accumulate_to_parent(rooted.order, rooted.parent, d)
    _build_sign_lists(
        rooted.child_indptr,
        rooted.child_list,
        d,
        rooted.head_neg,
        rooted.head_zero,
        rooted.head_pos,
        rooted.next_sibling,
        rooted.prev_sibling,
    )
    rooted.lists_ready = True
    return DemandTable(d, p, b)


def subtree_sizes(rooted: RootedTree) -> np.ndarray:
    """Number of nodes in each node's subtree (root gets n)."""
    sizes = np.ones(rooted.n, np.int64)
    _accumulate_to_parent(rooted.order, rooted.parent, sizes)
    return sizes


# ---------------------------------------------------------------------------
# generators


def path_tree(n: int) -> Tree:
    """The path 0-1-...-(n-1)."""
    if n < 1:
        raise InvalidTreeError("a tree needs at least one node")
    ids = np.arange(n - 1, dtype=np.int64)
    return Tree(n, np.stack([ids, ids + 1], axis=1)) if n > 1 else Tree(1, [])


def random_labeled_tree(n: int, seed: int) -> Tree:
    """Uniform random labeled tree on n nodes (decoded Prufer sequence)."""
    if n < 1:
        raise InvalidTreeError("a tree needs at least one node")
    rng = np.random.default_rng(seed)
    return _tree_from_rng(n, rng)


def _tree_from_rng(n: int, rng: np.random.Generator) -> Tree:
    if n == 1:
        return Tree(1, [])
    if n == 2:
        return Tree(2, [[0, 1]])
    seq = rng.integers(0, n, size=n - 2, dtype=np.int64)
    edges = np.empty((n - 1, 2), np.int64)
    _decode_prufer_seq(n, seq, edges)
    return Tree(n, edges)


def random_instance(n: int, k: int, seed: int, dist: str = "uniform") -> Instance:
    """Random instance: tree by ``dist``, then pebbles, then targets.

    ``dist`` is ``"uniform"`` (random labeled tree) or ``"path"``.  Each of
    the pebble and target sets is a uniform k-subset of the nodes, drawn
    independently.  Fixed seed means a fixed instance.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    if dist == "uniform":
        tree = _tree_from_rng(n, rng)
    elif dist == "path":
        tree = path_tree(n)
    else:
        raise ValueError(f"unknown tree distribution {dist!r}")
    pebbles = rng.choice(n, size=k, replace=False)
    targets = rng.choice(n, size=k, replace=False)
    return Instance(tree, pebbles, targets)


def enumerate_labeled_trees(n: int) -> Iterator[Tree]:
    """Yield every labeled tree on n nodes, once each (n^(n-2) trees)."""
    if n < 1:
        raise InvalidTreeError("a tree needs at least one node")
    if n == 1:
        yield Tree(1, [])
        return
    if n == 2:
        yield Tree(2, [[0, 1]])
        return
    seq = np.zeros(n - 2, np.int64)
    edges = np.empty((n - 1, 2), np.int64)
    total = n ** (n - 2)
    for code in range(total):
        c = code
        for i in range(n - 2):
            seq[i] = c % n
            c //= n
        _decode_prufer_seq(n, seq, edges)
        yield Tree(n, edges.copy())


# ---------------------------------------------------------------------------
# instance text format
#
#   line 1:        n k
#   lines 2..n:    u v          (one edge per line)
#   next line:     k pebble nodes   (omitted when k = 0)
#   next line:     k target nodes   (omitted when k = 0)
#
# '#' starts a comment; blank lines are ignored.  Ids may be arbitrary
# integers; anything that is not already 0..n-1 is normalized by sorting the
# distinct labels.


def parse_instance(text) -> Instance:
    """Parse the line-oriented instance format (str or bytes)."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    rows: List[List[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError:
            raise InstanceFormatError(f"line {lineno}: non-integer token") from None
    if not rows:
        raise InstanceFormatError("empty instance")
    header = rows[0]
    if len(header) != 2:
        raise InstanceFormatError("header must be exactly 'n k'")
    n, k = header
    if n < 1:
        raise InstanceFormatError(f"invalid node count {n}")
    if not 0 <= k <= n:
        raise InstanceFormatError(f"invalid pebble count {k} for n={n}")
    expected = 1 + (n - 1) + (2 if k > 0 else 0)
    if len(rows) != expected:
        raise InstanceFormatError(
            f"expected {expected} content lines for n={n}, k={k}, got {len(rows)}"
        )
    edge_rows = rows[1:n]
    for r in edge_rows:
        if len(r) != 2:
            raise InstanceFormatError("each edge line must hold exactly two ids")
    if k > 0:
        pebbles, targets = rows[n], rows[n + 1]
        if len(pebbles) != k or len(targets) != k:
            raise InstanceFormatError(f"pebble/target lines must each hold {k} ids")
    else:
        pebbles, targets = [], []
    edges = np.array(edge_rows, np.int64).reshape(-1, 2)
    pebbles = np.array(pebbles, np.int64)
    targets = np.array(targets, np.int64)
    labels = np.unique(np.concatenate([edges.ravel(), pebbles, targets]))
    if labels.size and (labels[0] < 0 or labels[-1] >= n or labels.size < n):
        # not already dense 0..n-1: remap sorted distinct labels
        if n > 1 and labels.size != n:
            raise InstanceFormatError(
                f"edge list names {labels.size} distinct nodes, expected {n}"
            )
        edges = np.searchsorted(labels, edges)
        pebbles = np.searchsorted(labels, pebbles)
        targets = np.searchsorted(labels, targets)
    try:
        tree = Tree(n, edges)
    except InvalidTreeError as exc:
        raise InstanceFormatError(str(exc)) from None
    return Instance(tree, pebbles, targets)


def format_instance(inst: Instance) -> str:
    """Render an instance in the canonical text format."""
    out = [f"{inst.n} {inst.k}"]
    out.extend(f"{int(u)} {int(v)}" for u, v in inst.tree.edges)
    if inst.k > 0:
        out.append(" ".join(str(int(u)) for u in inst.pebbles))
        out.append(" ".join(str(int(u)) for u in inst.targets))
    return "\n".join(out) + "\n"
