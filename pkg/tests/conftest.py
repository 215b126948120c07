"""Shared fixtures: the three worked examples used throughout the suite.

fig2: a 7-node tree where three pebbles cross a central junction; the
sequential optimum is 6 and the schedule has makespan 4, sum of costs 11.
fig4: the 6-node instance whose scheduled plan (4, 8) is beaten by the
bidirectional optimum (3, 6).  fig5: a 16-node instance separating the
one-directional and bidirectional optima (6, 20) vs (5, 19).
"""

import numpy as np
import pytest

from pebbletree import Instance, Tree


@pytest.fixture
def fig2():
    tree = Tree(7, [(0, 1), (1, 3), (2, 3), (3, 5), (4, 5), (5, 6)])
    return Instance(tree, [0, 2, 4], [3, 5, 6])


@pytest.fixture
def fig4():
    tree = Tree(6, [(0, 3), (0, 1), (0, 2), (1, 4), (3, 5)])
    return Instance(tree, [2, 4], [3, 5])


@pytest.fixture
def fig5():
    edges = [
        (0, 2), (2, 5), (0, 1), (1, 4), (4, 11), (11, 13), (13, 15),
        (0, 3), (3, 6), (6, 12), (12, 14), (4, 7), (4, 8), (4, 9), (4, 10),
    ]
    return Instance(Tree(16, edges), [1, 5, 11, 13, 15], [7, 8, 9, 10, 14])


def make_fig4_subdivided(s: int) -> Instance:
    """fig4 with the edge between nodes 0 and 3 subdivided ``s`` times.

    New nodes get ids 6..6+s-1 along the chain, so node names of the original
    six stay put and the gap the two agents must cross grows by ``s``.
    """
    edges = [(0, 1), (0, 2), (1, 4)]
    chain = [0] + list(range(6, 6 + s)) + [3]
    edges += list(zip(chain, chain[1:]))
    edges.append((3, 5))
    return Instance(Tree(6 + s, edges), [2, 4], [3, 5])


@pytest.fixture
def fig4_subdivided():
    return make_fig4_subdivided


def brute_subtree_demands(inst: Instance, root: int) -> np.ndarray:
    """Reference d(u) = |targets in T_u| - |pebbles in T_u| via explicit sets."""
    import networkx as nx

    g = nx.Graph(inst.tree.edges.tolist())
    g.add_nodes_from(range(inst.n))
    parent = {root: None}
    order = [root]
    for u in order:
        for v in g.neighbors(u):
            if v not in parent:
                parent[v] = u
                order.append(v)
    members = {u: {u} for u in range(inst.n)}
    for u in reversed(order):
        if parent[u] is not None:
            members[parent[u]] |= members[u]
    pset, bset = set(inst.pebbles.tolist()), set(inst.targets.tolist())
    d = np.zeros(inst.n, np.int64)
    for u in range(inst.n):
        d[u] = len(members[u] & bset) - len(members[u] & pset)
    return d
