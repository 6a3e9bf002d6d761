"""Breadth-first active baseline and passive ERM baseline."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import BudgetExhaustedError
from .hierarchy import Clustering, Cut, Hierarchy, cut_to_clustering
from .nr import ErmEngine
from .oracles import NodeLabeler, PairOracle, majority_vote_cost


@dataclass
class BfResult:
    clustering: Clustering
    cut: Cut
    queries: int
    trace: list[tuple[int, int]]  # (node, answer)


def run_bf(
    h: Hierarchy,
    labeler: Callable[[int], int],
    budget: Optional[int] = None,
    label_cost: Optional[Callable[[int], int]] = None,
    on_progress: Optional[Callable[[list[int]], None]] = None,
) -> BfResult:
    """Top-down frontier search: query a node, emit its leaves on 1, else
    descend into both children.  Uses at most 2K-1 queries on a noiseless
    K-cluster instance.

    ``budget`` caps pair queries; ``label_cost`` gives the pair cost of one
    node label (defaults to the labeler's majority size when available).
    When the budget cannot cover the next label, the current frontier is
    returned as the output clustering.
    """
    if label_cost is None:
        if isinstance(labeler, NodeLabeler):
            label_cost = lambda node: majority_vote_cost(h, node, labeler.votes)
        else:
            label_cost = lambda node: 1
    queue: deque[int] = deque([h.root])
    emitted: list[int] = []
    queries = 0
    trace: list[tuple[int, int]] = []
    while queue:
        node = queue[0]
        if h.is_leaf(node):
            queue.popleft()
            emitted.append(node)
            continue
        if budget is not None and queries + label_cost(node) > budget:
            break
        queue.popleft()
        try:
            answer = labeler(node)
        except BudgetExhaustedError:
            queue.appendleft(node)
            break
        queries += label_cost(node)
        trace.append((node, answer))
        if answer == 1:
            emitted.append(node)
        else:
            queue.append(h.left[node])
            queue.append(h.right[node])
        if on_progress is not None:
            on_progress(emitted + list(queue))
    boundary = emitted + list(queue)
    cut = Cut(boundary)
    return BfResult(
        clustering=cut_to_clustering(h, cut), cut=cut, queries=queries, trace=trace
    )


@dataclass
class ErmResult:
    clustering: Clustering
    cut: Cut
    queries: int


def run_erm(
    h: Hierarchy,
    oracle: PairOracle,
    m: int,
    rng,
    with_replacement: bool = True,
) -> ErmResult:
    """Passive learner: m uniform pairs, unit weights, one ERM extraction."""
    engine = ErmEngine(h)
    n = h.n
    if with_replacement:
        pairs = []
        for _ in range(m):
            i = rng.randrange(n)
            j = rng.randrange(n - 1)
            if j >= i:
                j += 1
            pairs.append((i, j))
    else:
        total = n * (n - 1) // 2
        from .oracles import pair_from_index

        idxs = rng.sample(range(total), min(m, total))
        pairs = [pair_from_index(n, k) for k in idxs]
    for (i, j) in pairs:
        sigma = oracle.answer(i, j)
        engine.add_weight(i, j, float(sigma))
    cut = engine.current_cut()
    return ErmResult(
        clustering=engine.current_clustering(), cut=cut, queries=len(pairs)
    )
