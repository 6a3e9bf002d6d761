"""Noiseless version-space active learner with amortized fast bookkeeping.

The learner maintains, per node, the exact number of cuts of that subtree
consistent with all labels revealed so far (arbitrary-precision: the count
grows like 1.502^n).  Each round it walks a backbone path of some fully
unrevealed component bottom-up and queries the lowest node whose label-1
restriction keeps at most two thirds of the component's cuts, which is
guaranteed to shrink the global version space by a 2/3 factor.

Revealed labels propagate: a 1 marks the whole subtree, a 0 marks the
ancestor chain.  Backbones start at the deepest leaf whose parent is still
unrevealed, found by a monotone scan over the leaves sorted by depth.  A
node whose two children were both revealed 1 by separate queries is no
longer reachable through that scan yet still carries an ambiguous label;
such nodes are tracked separately and used as backbone bottoms once no
scannable leaf remains.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

from .errors import InconsistentLabelsError
from .hierarchy import Cut, Hierarchy

UNKNOWN, ONE, ZERO = 0, 1, 2


@dataclass
class OtsQueryRecord:
    step: int
    node: int
    answer: int
    vs_before: int
    vs_after: int
    backbone_leaf: int
    branch_size: int  # cuts consistent with answer 1 at the queried node
    component_size: int  # cuts of the queried component before the answer


@dataclass
class OtsResult:
    cut: Cut
    records: list[OtsQueryRecord]
    queries: int
    touched: int
    n_hollow_backbones: int


class OtsState:
    """Mutable run state; owned exclusively by one run."""

    def __init__(self, h: Hierarchy):
        self.h = h
        self.status = [UNKNOWN] * h.n_nodes
        self.size: list[int] = [0] * h.n_nodes
        for i in h.post_order():
            if h.is_leaf(i):
                self.size[i] = 1
            else:
                self.size[i] = 1 + self.size[h.left[i]] * self.size[h.right[i]]
        self.global_size = self.size[h.root]
        self.unknown_internal = h.n_nodes - h.n
        # Leaves sorted ascending by (depth, id); scanned once, back to front.
        self.scan = sorted(range(h.n), key=lambda i: (h.depth[i], i))
        self.scan_idx = h.n - 1
        self._hollow: list[tuple[int, int, int]] = []
        self.touched = 0
        self.n_hollow_backbones = 0

    # -- size helpers -----------------------------------------------------

    def node_size(self, i: int) -> int:
        """Consistent cut count of T(i) given current labels."""
        if self.status[i] != UNKNOWN or self.h.is_leaf(i):
            return 1
        return self.size[i]

    def done(self) -> bool:
        return self.unknown_internal == 0

    # -- backbone selection -------------------------------------------------

    def pick_backbone(self) -> list[int]:
        """Bottom-up node path from the chosen bottom to its component root.

        The bottom is the deepest candidate among scannable leaves and
        hollow nodes (internal, both children revealed 1).  Starting from
        the overall deepest candidate guarantees the bottom's sibling has a
        single consistent labeling, which the per-query 1/3 split bound
        hinges on; a merely-deepest *leaf* can sit above a hollow node and
        break it.  A leaf wins ties at equal depth.
        """
        h = self.h
        leaf = -1
        while self.scan_idx >= 0:
            cand = self.scan[self.scan_idx]
            self.touched += 1
            if self.status[h.parent[cand]] == UNKNOWN:
                leaf = cand
                break
            self.scan_idx -= 1
        hollow = self._peek_hollow()
        if hollow >= 0 and (leaf < 0 or h.depth[hollow] > h.depth[leaf]):
            bottom = hollow
            self.n_hollow_backbones += 1
        elif leaf >= 0:
            bottom = leaf
        else:
            raise AssertionError("no backbone bottom found while labels remain")

        path = [bottom]
        cur = bottom
        while h.parent[cur] >= 0 and self.status[h.parent[cur]] == UNKNOWN:
            cur = h.parent[cur]
            path.append(cur)
            self.touched += 1
        return path

    def _peek_hollow(self) -> int:
        """Deepest currently hollow node, or -1.  Entries stay queued until
        the node is determined: a backbone from a hollow bottom may resolve
        only its ancestors and leave the node hollow and still due."""
        h = self.h
        while self._hollow:
            node = self._hollow[0][2]
            if (
                self.status[node] == UNKNOWN
                and self.status[h.left[node]] == ONE
                and self.status[h.right[node]] == ONE
            ):
                return node
            heapq.heappop(self._hollow)
        return -1

    # -- split-node search ----------------------------------------------------

    def find_split_node(self, path: list[int]) -> tuple[int, int, int, int]:
        """Lowest path node whose label-1 branch keeps <= 2/3 of the cuts.

        Returns (node, its path index, label-1 branch size, component size);
        all counts are exact integers.
        """
        h = self.h
        m = len(path) - 1
        bottom = path[0]
        bottom_is_leaf = h.is_leaf(bottom)

        # Per-level products: level z holds the number of cuts in which the
        # path is labeled 1 up to exactly position z, which is the product
        # of the off-path sibling subtree counts above z.
        levels = [0] * (m + 1)
        levels[m] = 1
        for z in range(m - 1, -1, -1):
            sib = h.sibling(path[z])
            levels[z] = levels[z + 1] * self.node_size(sib)
            self.touched += 1
        all_above = 0 if bottom_is_leaf else levels[0]
        total = all_above + sum(levels)
        assert total == self.size[path[-1]], "level decomposition out of sync"

        suffix = 0
        branch = [0] * (m + 1)
        for k in range(m, -1, -1):
            suffix += levels[k]
            branch[k] = suffix
        start = 1 if bottom_is_leaf else 0
        for k in range(start, m + 1):
            self.touched += 1
            if 3 * branch[k] <= 2 * total:
                return path[k], k, branch[k], total
        raise AssertionError("no split node on backbone")

    # -- label application --------------------------------------------------

    def apply_answer(self, path: list[int], k: int, answer: int) -> None:
        h = self.h
        node = path[k]
        if self.status[node] != UNKNOWN:
            raise InconsistentLabelsError(
                f"node {node} queried while already labeled {self.status[node]}"
            )
        old_total = self.size[path[-1]]
        if answer == 1:
            self._mark_subtree_one(node)
            if k < len(path) - 1:
                for t in range(k + 1, len(path)):
                    i = path[t]
                    self.size[i] = 1 + self.node_size(h.left[i]) * self.node_size(
                        h.right[i]
                    )
                    self.touched += 1
                new_factor = self.size[path[-1]]
            else:
                new_factor = 1
            parent = h.parent[node]
            if parent >= 0 and self.status[parent] == UNKNOWN:
                sib = h.sibling(node)
                if self.status[sib] == ONE:
                    heapq.heappush(
                        self._hollow, (-h.depth[parent], -parent, parent)
                    )
        else:
            for t in range(k, len(path)):
                z = path[t]
                self.status[z] = ZERO
                self.unknown_internal -= 1
                self.touched += 1
            new_factor = 1
            for t in range(k, len(path)):
                z = path[t]
                below = path[t - 1] if t > k else -1
                for c in (h.left[z], h.right[z]):
                    if c != below and self.status[c] == UNKNOWN and h.is_internal(c):
                        new_factor *= self.size[c]
        self.global_size = self.global_size // old_total * new_factor

    def _mark_subtree_one(self, node: int) -> None:
        h = self.h
        stack = [node]
        while stack:
            i = stack.pop()
            if self.status[i] != UNKNOWN:
                continue
            self.status[i] = ONE
            self.touched += 1
            if h.is_internal(i):
                self.unknown_internal -= 1
                stack.append(h.left[i])
                stack.append(h.right[i])

    def check_closure(self) -> None:
        """Test hook: labels must be 1-down-closed and 0-up-closed."""
        h = self.h
        for i in range(h.n_nodes):
            if self.status[i] == ONE and h.is_internal(i):
                if self.status[h.left[i]] != ONE or self.status[h.right[i]] != ONE:
                    raise InconsistentLabelsError(f"node {i} is 1 with non-1 child")
            if self.status[i] == ZERO and h.parent[i] >= 0:
                if self.status[h.parent[i]] != ZERO:
                    raise InconsistentLabelsError(f"node {i} is 0 under a non-0 parent")

    def extract_cut(self) -> Cut:
        h = self.h
        boundary = []
        for i in range(h.n_nodes):
            if self.status[i] == ONE:
                p = h.parent[i]
                if p < 0 or self.status[p] == ZERO:
                    boundary.append(i)
            elif self.status[i] == UNKNOWN and h.is_leaf(i):
                boundary.append(i)
        return Cut(boundary)


def run_ots(
    h: Hierarchy,
    labeler: Callable[[int], int],
    strict: bool = True,
    collect_trace: bool = True,
) -> OtsResult:
    """Recover the planted cut, querying node labels through ``labeler``.

    The labeler must be consistent with some cut (noiseless realizable);
    majority-vote labelers may be plugged in, in which case strict=False
    downgrades inconsistency errors to keeping the first-revealed label.
    """
    state = OtsState(h)
    records: list[OtsQueryRecord] = []
    step = 0
    while not state.done():
        path = state.pick_backbone()
        node, k, branch, total = state.find_split_node(path)
        answer = labeler(node)
        if answer not in (0, 1):
            raise InconsistentLabelsError(f"labeler returned {answer!r}")
        step += 1
        vs_before = state.global_size
        try:
            state.apply_answer(path, k, answer)
        except InconsistentLabelsError:
            if strict:
                raise
            continue
        if collect_trace:
            records.append(
                OtsQueryRecord(
                    step=step,
                    node=node,
                    answer=answer,
                    vs_before=vs_before,
                    vs_after=state.global_size,
                    backbone_leaf=path[0],
                    branch_size=branch,
                    component_size=total,
                )
            )
    return OtsResult(
        cut=state.extract_cut(),
        records=records,
        queries=step,
        touched=state.touched,
        n_hollow_backbones=state.n_hollow_backbones,
    )


def max_queries_bound(n_cuts: int) -> int:
    """Smallest q with (3/2)^q >= n_cuts, computed exactly."""
    q = 0
    lhs, rhs = 1, n_cuts
    while lhs < rhs:
        q += 1
        lhs *= 3
        rhs *= 2
    return q


def write_trace_csv(records: list[OtsQueryRecord], path: str) -> None:
    """Query trace with version-space sizes as big-integer bit lengths."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "queried_node", "answer", "vs_bits_before", "vs_bits_after"])
        for r in records:
            writer.writerow(
                [r.step, r.node, r.answer, r.vs_before.bit_length(), r.vs_after.bit_length()]
            )
