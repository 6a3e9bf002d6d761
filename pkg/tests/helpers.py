"""Shared fixtures and independent reference implementations.

Everything here is deliberately brute force: cut enumeration, naive LCA,
naive version-space bookkeeping, per-cut cost tables.  Tests compare the
package's incremental structures against these.
"""
from __future__ import annotations

import random
from typing import Callable, Optional

from treecut.hierarchy import Cut, Hierarchy, build_hierarchy
from treecut.harness import generate_tree
from treecut.oracles import PairOracle


def tree_22cuts() -> Hierarchy:
    """8-leaf tree with 22 cuts: left block of 5 leaves, right block of 3.

    Internal layout: 8=(0,1), 9=(8,2), 10=(3,4), 11=(9,10), 12=(6,7),
    13=(5,12), root 14=(11,13).
    """
    parents: list[Optional[int]] = [None] * 15
    parents[0] = 8
    parents[1] = 8
    parents[8] = 9
    parents[2] = 9
    parents[3] = 10
    parents[4] = 10
    parents[9] = 11
    parents[10] = 11
    parents[6] = 12
    parents[7] = 12
    parents[5] = 13
    parents[12] = 13
    parents[11] = 14
    parents[13] = 14
    return build_hierarchy(parents)


CUT_3CLUSTERS = Cut([11, 5, 12])  # clusters {0..4}, {5}, {6,7}


def three_cherry_tree() -> Hierarchy:
    """7-leaf tree with three sibling-leaf cherries and one lone leaf.

    Internal layout: 7=(0,1), 8=(2,3), 9=(7,8), 10=(4,5), 11=(10,6),
    root 12=(9,11).  lca(0,3) is node 9 (covers leaves 0..3).
    """
    parents: list[Optional[int]] = [None] * 13
    parents[0] = 7
    parents[1] = 7
    parents[2] = 8
    parents[3] = 8
    parents[7] = 9
    parents[8] = 9
    parents[4] = 10
    parents[5] = 10
    parents[10] = 11
    parents[6] = 11
    parents[9] = 12
    parents[11] = 12
    return build_hierarchy(parents)


CHERRY_CUT = Cut([7, 8, 10, 6])  # {0,1},{2,3},{4,5},{6}: complexity 3


def random_tree(n: int, seed: int) -> Hierarchy:
    return generate_tree("random", n, seed)


def enumerate_cuts(h: Hierarchy) -> list[frozenset[int]]:
    """All lower boundaries, by bottom-up product expansion."""
    table: list[list[frozenset[int]]] = [[] for _ in range(h.n_nodes)]
    for i in h.post_order():
        if h.is_leaf(i):
            table[i] = [frozenset([i])]
        else:
            combos = [
                a | b for a in table[h.left[i]] for b in table[h.right[i]]
            ]
            table[i] = [frozenset([i])] + combos
    return table[h.root]


def random_realized_cut(h: Hierarchy, rng, stop: float = 0.4) -> Cut:
    boundary = []
    stack = [h.root]
    while stack:
        i = stack.pop()
        if h.is_leaf(i) or rng.random() < stop:
            boundary.append(i)
        else:
            stack.append(h.left[i])
            stack.append(h.right[i])
    return Cut(boundary)


def planted_node_labeler(h: Hierarchy, cut: Cut) -> Callable[[int], int]:
    """Free (unmetered) exact node labels for a planted cut."""
    from treecut.priors import node_statuses

    status = node_statuses(h, cut)
    # status: 0 above, 1 boundary, 2 below; label 1 iff at/below the cut.
    return lambda node: 0 if status[node] == 0 else 1


def cluster_ids_for_cut(h: Hierarchy, members: frozenset[int]) -> list[int]:
    ids = [0] * h.n
    for k, node in enumerate(sorted(members)):
        for leaf in h.leaves_under(node):
            ids[leaf] = k
    return ids


class BruteCutCosts:
    """Per-cut running costs under a stream of weighted pair observations.

    Each observation pays |w| on every cut whose same/different relation
    disagrees with the weight's sign.  Exact mirror of the incremental
    engine's objective, kept cut by cut.
    """

    def __init__(self, h: Hierarchy):
        self.h = h
        self.cuts = enumerate_cuts(h)
        self.cluster_ids = [cluster_ids_for_cut(h, c) for c in self.cuts]
        self.costs = [0.0] * len(self.cuts)

    def add(self, i: int, j: int, w: float) -> None:
        for idx, ids in enumerate(self.cluster_ids):
            same = ids[i] == ids[j]
            if same and w < 0:
                self.costs[idx] += -w
            elif not same and w > 0:
                self.costs[idx] += w

    def min_cost(self) -> float:
        return min(self.costs)

    def constrained_min(self, i: int, j: int, force_same: bool) -> float:
        best = None
        for idx, ids in enumerate(self.cluster_ids):
            if (ids[i] == ids[j]) != force_same:
                continue
            if best is None or self.costs[idx] < best:
                best = self.costs[idx]
        return best

    def argmin_clusters(self) -> list[frozenset[int]]:
        m = self.min_cost()
        return [c for c, cost in zip(self.cuts, self.costs) if cost == m]


# ---------------------------------------------------------------------------
# Naive version-space learner (reference for the fast implementation)
# ---------------------------------------------------------------------------


class NaiveVersionSpaceRun:
    """From-scratch recomputation each round, same selection tie-breaks."""

    UNKNOWN, ONE, ZERO = 0, 1, 2

    def __init__(self, h: Hierarchy):
        self.h = h
        self.status = [self.UNKNOWN] * h.n_nodes

    def node_size(self, i: int) -> int:
        if self.status[i] != self.UNKNOWN or self.h.is_leaf(i):
            return 1
        return self._sizes[i]

    def _recompute(self) -> None:
        h = self.h
        self._sizes = [1] * h.n_nodes
        for i in h.post_order():
            if h.is_internal(i) and self.status[i] == self.UNKNOWN:
                self._sizes[i] = 1 + self.node_size(h.left[i]) * self.node_size(
                    h.right[i]
                )

    def pick_bottom(self) -> int:
        """Deepest scannable leaf or hollow node; a leaf wins depth ties."""
        h = self.h
        scannable = [
            leaf
            for leaf in range(h.n)
            if self.status[h.parent[leaf]] == self.UNKNOWN
        ]
        hollow = [
            i
            for i in h.internal_nodes()
            if self.status[i] == self.UNKNOWN
            and self.status[h.left[i]] == self.ONE
            and self.status[h.right[i]] == self.ONE
        ]
        best_leaf = max(scannable, key=lambda i: (h.depth[i], i), default=-1)
        best_hollow = max(hollow, key=lambda i: (h.depth[i], i), default=-1)
        if best_hollow >= 0 and (
            best_leaf < 0 or h.depth[best_hollow] > h.depth[best_leaf]
        ):
            return best_hollow
        return best_leaf

    def path_from(self, bottom: int) -> list[int]:
        h = self.h
        path = [bottom]
        cur = bottom
        while h.parent[cur] >= 0 and self.status[h.parent[cur]] == self.UNKNOWN:
            cur = h.parent[cur]
            path.append(cur)
        return path

    def restricted_size(self, path: list[int], k: int) -> int:
        """|S^{y(path[k])=1}| of the component, recomputed from scratch."""
        h = self.h
        size = 1
        for t in range(k + 1, len(path)):
            sib = h.sibling(path[t - 1])
            size = 1 + size * self.node_size(sib)
        return size

    def choose_query(self) -> int:
        h = self.h
        self._recompute()
        bottom = self.pick_bottom()
        path = self.path_from(bottom)
        total = self.node_size(path[-1])
        start = 1 if h.is_leaf(bottom) else 0
        for k in range(start, len(path)):
            if 3 * self.restricted_size(path, k) <= 2 * total:
                return path[k]
        raise AssertionError("no split node")

    def apply(self, node: int, answer: int) -> None:
        h = self.h
        if answer == 1:
            stack = [node]
            while stack:
                i = stack.pop()
                if self.status[i] != self.UNKNOWN:
                    continue
                self.status[i] = self.ONE
                if h.is_internal(i):
                    stack.append(h.left[i])
                    stack.append(h.right[i])
        else:
            cur = node
            while cur >= 0 and self.status[cur] == self.UNKNOWN:
                self.status[cur] = self.ZERO
                cur = h.parent[cur]

    def done(self) -> bool:
        return all(
            self.status[i] != self.UNKNOWN for i in self.h.internal_nodes()
        )

    def run(self, labeler: Callable[[int], int]) -> list[tuple[int, int]]:
        sequence = []
        while not self.done():
            node = self.choose_query()
            answer = labeler(node)
            sequence.append((node, answer))
            self.apply(node, answer)
        return sequence


class CountingOracle(PairOracle):
    """Wraps a callable so tests can build ad hoc oracles."""

    def __init__(self, fn: Callable[[int, int], int]):
        super().__init__()
        self.fn = fn

    def _answer(self, a: int, b: int) -> int:
        return self.fn(a, b)
