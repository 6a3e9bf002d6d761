"""Strongly binary tree model, cuts, clusterings, cut counting and LCA index.

Every algorithm in the package works on an immutable :class:`Hierarchy`.
Leaves always occupy ids ``0..n-1``; internal nodes use the remaining ids.
Subtrees own contiguous ranges of the left-to-right leaf order, which makes
cluster extraction and uniform pair sampling O(1) bookkeeping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import (
    CyclicError,
    InvalidCutError,
    LeafNodeError,
    MultipleRootsError,
    NotBinaryError,
)


class Hierarchy:
    """Immutable strongly binary tree over n leaves.

    Attributes
    ----------
    n : int              number of leaves (ids 0..n-1)
    n_nodes : int        total node count (2n - 1)
    root : int           root id
    parent : list        parent id per node, -1 for the root
    left, right : list   child ids per node, -1 for leaves
    depth : list         edge depth per node, root = 0
    height : int         max leaf depth
    payloads : list      one opaque display string per leaf
    leaf_order : list    leaf ids in left-to-right tree order
    leaf_lo, leaf_hi :   per-node half-open range into ``leaf_order``
    """

    __slots__ = (
        "n",
        "n_nodes",
        "root",
        "parent",
        "left",
        "right",
        "depth",
        "height",
        "payloads",
        "leaf_order",
        "leaf_pos",
        "leaf_lo",
        "leaf_hi",
    )

    def __init__(
        self,
        parent: Sequence[int],
        left: Sequence[int],
        right: Sequence[int],
        payloads: Optional[Sequence[str]] = None,
    ):
        self.n_nodes = len(parent)
        self.n = (self.n_nodes + 1) // 2
        self.parent = list(parent)
        self.left = list(left)
        self.right = list(right)
        self.root = next(i for i in range(self.n_nodes) if self.parent[i] == -1)
        if payloads is None:
            payloads = [str(i) for i in range(self.n)]
        self.payloads = list(payloads)

        # Depth via iterative top-down pass; deep linkage trees overflow
        # Python recursion limits, so nothing in this class recurses.
        self.depth = [0] * self.n_nodes
        order = self._topo_order()
        for i in order:
            if self.left[i] >= 0:
                self.depth[self.left[i]] = self.depth[i] + 1
                self.depth[self.right[i]] = self.depth[i] + 1
        self.height = max(self.depth[i] for i in range(self.n)) if self.n > 1 else 0

        # Left-to-right leaf order and per-node leaf ranges.
        self.leaf_order = []
        self.leaf_lo = [0] * self.n_nodes
        self.leaf_hi = [0] * self.n_nodes
        stack = [(self.root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                self.leaf_hi[node] = len(self.leaf_order)
                continue
            self.leaf_lo[node] = len(self.leaf_order)
            if self.is_leaf(node):
                self.leaf_order.append(node)
                self.leaf_hi[node] = len(self.leaf_order)
            else:
                stack.append((node, True))
                stack.append((self.right[node], False))
                stack.append((self.left[node], False))
        self.leaf_pos = [0] * self.n
        for pos, leaf in enumerate(self.leaf_order):
            self.leaf_pos[leaf] = pos

    def _topo_order(self) -> list[int]:
        """Nodes in top-down order (every parent before its children)."""
        order = [self.root]
        k = 0
        while k < len(order):
            i = order[k]
            k += 1
            if self.left[i] >= 0:
                order.append(self.left[i])
                order.append(self.right[i])
        return order

    def is_leaf(self, i: int) -> bool:
        return i < self.n

    def is_internal(self, i: int) -> bool:
        return i >= self.n

    def internal_nodes(self) -> range:
        return range(self.n, self.n_nodes)

    def children(self, i: int) -> tuple[int, int]:
        return self.left[i], self.right[i]

    def sibling(self, i: int) -> int:
        p = self.parent[i]
        if p < 0:
            raise ValueError("root has no sibling")
        return self.right[p] if self.left[p] == i else self.left[p]

    def leaf_count(self, i: int) -> int:
        """Number of leaves under node i."""
        return self.leaf_hi[i] - self.leaf_lo[i]

    def leaves_under(self, i: int) -> list[int]:
        return self.leaf_order[self.leaf_lo[i] : self.leaf_hi[i]]

    def leftmost_leaf(self, i: int) -> int:
        return self.leaf_order[self.leaf_lo[i]]

    def rightmost_leaf(self, i: int) -> int:
        return self.leaf_order[self.leaf_hi[i] - 1]

    def post_order(self) -> Iterator[int]:
        """Nodes with every child before its parent."""
        return reversed(self._topo_order())

    def __repr__(self) -> str:
        return f"Hierarchy(n={self.n}, height={self.height})"


def build_hierarchy(
    parents: Sequence[Optional[int]],
    payloads: Optional[Sequence[str]] = None,
    child_order: Optional[Sequence[Optional[tuple[int, int]]]] = None,
) -> Hierarchy:
    """Build and validate a Hierarchy from per-node optional parent ids.

    Ids must be contiguous ``0..len(parents)-1`` with the leaves (childless
    nodes) occupying ``0..n-1``.  Left/right child order defaults to the
    order in which children appear in the id sequence; ``child_order`` can
    pin it explicitly (the persisted format does, so loaded trees replay
    identically).

    Raises NotBinaryError, CyclicError or MultipleRootsError on malformed
    input.
    """
    n_nodes = len(parents)
    if n_nodes == 0:
        raise MultipleRootsError("empty tree")
    roots = [i for i, p in enumerate(parents) if p is None]
    if len(roots) != 1:
        raise MultipleRootsError(f"expected exactly one root, found {len(roots)}")
    root = roots[0]

    children: list[list[int]] = [[] for _ in range(n_nodes)]
    for i, p in enumerate(parents):
        if p is None:
            continue
        if not isinstance(p, int) or p < 0 or p >= n_nodes:
            raise CyclicError(f"node {i} has out-of-range parent {p}")
        children[p].append(i)

    left = [-1] * n_nodes
    right = [-1] * n_nodes
    for i, ch in enumerate(children):
        if len(ch) == 2:
            if child_order is not None and child_order[i] is not None:
                l, r = child_order[i]
                if sorted((l, r)) != sorted(ch):
                    raise NotBinaryError(
                        f"node {i}: child order {child_order[i]} does not "
                        f"match children {ch}"
                    )
                left[i], right[i] = l, r
            else:
                left[i], right[i] = ch
        elif len(ch) != 0:
            raise NotBinaryError(f"node {i} has {len(ch)} children")

    parent = [-1 if p is None else p for p in parents]

    # Reachability check: with exactly one root and parents everywhere else,
    # any unreachable node sits on a parent cycle.
    seen = [False] * n_nodes
    queue = [root]
    seen[root] = True
    while queue:
        i = queue.pop()
        for c in (left[i], right[i]):
            if c >= 0:
                if seen[c]:
                    raise CyclicError(f"node {c} reached twice")
                seen[c] = True
                queue.append(c)
    if not all(seen):
        bad = seen.index(False)
        raise CyclicError(f"node {bad} unreachable from root (parent cycle)")

    n_leaves = sum(1 for i in range(n_nodes) if left[i] < 0)
    if n_nodes != 2 * n_leaves - 1:
        raise NotBinaryError("node count is not 2n-1 for n leaves")
    for i in range(n_leaves):
        if left[i] >= 0:
            raise NotBinaryError(
                f"leaves must occupy ids 0..{n_leaves - 1}; node {i} is internal"
            )

    if payloads is not None and len(payloads) != n_leaves:
        raise NotBinaryError("payloads must have one entry per leaf")
    return Hierarchy(parent, left, right, payloads)


# ---------------------------------------------------------------------------
# Cuts and clusterings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cut:
    """Lower boundary of a tree cut: an antichain whose leaf sets tile L."""

    nodes: frozenset[int]

    def __init__(self, nodes: Iterable[int]):
        object.__setattr__(self, "nodes", frozenset(int(i) for i in nodes))

    def sorted_ids(self) -> list[int]:
        return sorted(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[int]:
        return iter(self.nodes)


@dataclass(frozen=True)
class Clustering:
    """Partition of the leaves into non-empty disjoint clusters."""

    clusters: tuple[frozenset[int], ...]

    def __init__(self, clusters: Iterable[Iterable[int]]):
        groups = tuple(
            sorted((frozenset(int(x) for x in c) for c in clusters), key=min)
        )
        object.__setattr__(self, "clusters", groups)

    @property
    def k(self) -> int:
        return len(self.clusters)

    def labels(self, n: int) -> np.ndarray:
        """Per-leaf cluster index (clusters numbered by smallest member)."""
        lab = np.full(n, -1, dtype=np.int64)
        for idx, c in enumerate(self.clusters):
            for leaf in c:
                lab[leaf] = idx
        return lab

    def to_lists(self) -> list[list[int]]:
        return [sorted(c) for c in self.clusters]

    def __len__(self) -> int:
        return len(self.clusters)


def validate_cut(h: Hierarchy, cut: Cut) -> list[int]:
    """Return the cut's members sorted by leaf range, or raise InvalidCutError."""
    members = list(cut.nodes)
    if not members:
        raise InvalidCutError("empty cut")
    for i in members:
        if i < 0 or i >= h.n_nodes:
            raise InvalidCutError(f"node {i} out of range")
    members.sort(key=lambda i: h.leaf_lo[i])
    pos = 0
    for i in members:
        if h.leaf_lo[i] != pos:
            raise InvalidCutError("cut members overlap or leave a gap")
        pos = h.leaf_hi[i]
    if pos != h.n:
        raise InvalidCutError("cut does not cover all leaves")
    return members


def cut_to_clustering(h: Hierarchy, cut: Cut) -> Clustering:
    """Leaf partition induced by a cut: one cluster per lower-boundary node."""
    members = validate_cut(h, cut)
    return Clustering([h.leaves_under(i) for i in members])


def clustering_to_cut(h: Hierarchy, clustering: Clustering) -> Optional[Cut]:
    """Inverse of cut_to_clustering, or None when T does not realize it."""
    nodes = []
    for c in clustering.clusters:
        lo = min(h.leaf_pos[x] for x in c)
        hi = max(h.leaf_pos[x] for x in c) + 1
        if hi - lo != len(c):
            return None
        # Walk up from one leaf until the subtree range matches the cluster.
        node = next(iter(c))
        while h.leaf_hi[node] - h.leaf_lo[node] < len(c):
            node = h.parent[node]
        if h.leaf_lo[node] != lo or h.leaf_hi[node] != hi:
            return None
        nodes.append(node)
    cut = Cut(nodes)
    try:
        validate_cut(h, cut)
    except InvalidCutError:
        return None
    return cut


def count_cuts(h: Hierarchy) -> list[int]:
    """Exact per-node cut counts: 1 for leaves, 1 + left * right above."""
    counts = [0] * h.n_nodes
    for i in h.post_order():
        if h.is_leaf(i):
            counts[i] = 1
        else:
            counts[i] = 1 + counts[h.left[i]] * counts[h.right[i]]
    return counts


def total_cuts(h: Hierarchy) -> int:
    return count_cuts(h)[h.root]


# ---------------------------------------------------------------------------
# LCA index
# ---------------------------------------------------------------------------


class LcaIndex:
    """Constant-time lowest common ancestor via Euler tour + sparse table.

    Preprocessing is O(n log n); queries are O(1).  Also records the
    leftmost/rightmost descendant leaf of every node.
    """

    __slots__ = ("h", "first_occ", "euler", "_st", "_log")

    def __init__(self, h: Hierarchy):
        self.h = h
        m = 2 * h.n_nodes - 1
        euler = np.empty(m, dtype=np.int64)
        euler_depth = np.empty(m, dtype=np.int64)
        first_occ = np.full(h.n_nodes, -1, dtype=np.int64)

        k = 0
        stack: list[tuple[int, int]] = [(h.root, 0)]
        # state: 0 = first visit, 1 = back from left, 2 = back from right
        while stack:
            node, state = stack.pop()
            if state == 0 and first_occ[node] < 0:
                first_occ[node] = k
            euler[k] = node
            euler_depth[k] = h.depth[node]
            k += 1
            if h.is_leaf(node):
                continue
            if state == 0:
                stack.append((node, 1))
                stack.append((h.left[node], 0))
            elif state == 1:
                stack.append((node, 2))
                stack.append((h.right[node], 0))
        assert k == m
        self.euler = euler
        self.first_occ = first_occ

        log = np.zeros(m + 1, dtype=np.int64)
        for i in range(2, m + 1):
            log[i] = log[i // 2] + 1
        self._log = log
        k_max = int(log[m]) + 1
        st = np.empty((k_max, m), dtype=np.int64)
        st[0] = np.arange(m)
        for j in range(1, k_max):
            span = 1 << j
            half = span >> 1
            prev = st[j - 1]
            cur = st[j]
            a = prev[: m - span + 1]
            b = prev[half : m - half + 1]
            cur[: m - span + 1] = np.where(euler_depth[a] <= euler_depth[b], a, b)
        self._st = st

    def lca(self, a: int, b: int) -> int:
        if a == b:
            return a
        lo = int(self.first_occ[a])
        hi = int(self.first_occ[b])
        if lo > hi:
            lo, hi = hi, lo
        j = int(self._log[hi - lo + 1])
        st = self._st[j]
        x = int(st[lo])
        y = int(st[hi - (1 << j) + 1])
        euler = self.euler
        h = self.h
        return int(euler[x] if h.depth[int(euler[x])] <= h.depth[int(euler[y])] else euler[y])

    def leftmost_leaf(self, i: int) -> int:
        return self.h.leftmost_leaf(i)

    def rightmost_leaf(self, i: int) -> int:
        return self.h.rightmost_leaf(i)


def preprocess_lca(h: Hierarchy) -> LcaIndex:
    return LcaIndex(h)


def lca_naive(h: Hierarchy, a: int, b: int) -> int:
    """Reference LCA by parent walk; used to cross-check the index."""
    da, db = h.depth[a], h.depth[b]
    while da > db:
        a = h.parent[a]
        da -= 1
    while db > da:
        b = h.parent[b]
        db -= 1
    while a != b:
        a = h.parent[a]
        b = h.parent[b]
    return a


# ---------------------------------------------------------------------------
# Node queries and statistics
# ---------------------------------------------------------------------------


def sample_node_query(h: Hierarchy, i: int, rng) -> tuple[int, int]:
    """Uniform leaf pair from L(left(i)) x L(right(i)); answers y(i)."""
    if h.is_leaf(i):
        raise LeafNodeError(f"node {i} is a leaf")
    l, r = h.left[i], h.right[i]
    a = h.leaf_order[rng.randrange(h.leaf_lo[l], h.leaf_hi[l])]
    b = h.leaf_order[rng.randrange(h.leaf_lo[r], h.leaf_hi[r])]
    return a, b


@dataclass
class LeafDepthStats:
    n: int
    height: int
    avg_depth: float
    std_depth: float


def leaf_depth_stats(h: Hierarchy) -> LeafDepthStats:
    """Average and population standard deviation of leaf depths."""
    depths = [h.depth[i] for i in range(h.n)]
    n = len(depths)
    mean = sum(depths) / n
    var = sum((d - mean) ** 2 for d in depths) / n
    return LeafDepthStats(n=n, height=h.height, avg_depth=mean, std_depth=math.sqrt(var))
