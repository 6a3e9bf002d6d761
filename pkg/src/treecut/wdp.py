"""Entropy-guided dichotomic path search over a prior, plus its noisy variant.

The learner keeps a forest of maximal unresolved subtrees.  Each node in a
live subtree carries an edge mass: the probability, under the current
posterior, that the hidden cut crosses the edge just above that node.  The
masses along any leaf-to-root path of a live subtree sum to one.  Each
round the learner picks the leaf-to-root path of maximum entropy, binary
searches it (weighted by edge mass) for the cut edge, emits the resolved
cluster, and renormalizes the masses of the newly split-off subtrees.

The noise-robust variant first force-resolves every internal node with too
few cross pairs to vote reliably, then runs the same search with majority
votes as the label source.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import BudgetExhaustedError, EmptyForestError
from .hierarchy import Clustering, Cut, Hierarchy, cut_to_clustering
from .oracles import NodeLabeler, PairOracle
from .priors import Prior, map_cut


def _entropy_term(q: float) -> float:
    return 0.0 if q <= 0.0 else -q * math.log2(q)


@dataclass
class SearchRecord:
    search_idx: int
    path_leaf: int
    path_len: int
    entropy: float
    normalized_entropy: float
    queries: int
    cut_node: int
    edge_mass: float  # mass of the discovered edge at search start
    contradictions: int = 0


@dataclass
class WdpResult:
    cut: Cut
    clustering: Clustering
    searches: list[SearchRecord]
    queries: int
    contradictions: int
    max_mass_error: float


@dataclass
class _TreeEntry:
    root: int
    best_entropy: float
    best_leaf: int


class WdpState:
    """Posterior, edge masses and live forest for one run."""

    def __init__(self, h: Hierarchy, prior: Prior, frozen_one: Optional[list[bool]] = None):
        self.h = h
        self.p = list(prior.values)
        self.q = [0.0] * h.n_nodes
        self.label: list[Optional[int]] = [None] * h.n_nodes
        # frozen_one marks nodes acting as leaves (their subtree is already
        # known to lie inside one cluster); plain runs freeze only leaves.
        if frozen_one is None:
            frozen_one = [h.is_leaf(i) for i in range(h.n_nodes)]
        self.frozen_one = frozen_one
        for i in range(h.n_nodes):
            if frozen_one[i]:
                self.p[i] = 1.0
        self.forest: dict[int, _TreeEntry] = {}
        self.emitted: list[int] = []
        self.validate_mass = False
        self.max_mass_error = 0.0
        if self.is_effective_leaf(h.root):
            self.emitted.append(h.root)
        else:
            self._init_tree(h.root)

    def is_effective_leaf(self, i: int) -> bool:
        return self.frozen_one[i]

    def _init_tree(self, root: int) -> None:
        """Recompute edge masses inside a new live subtree and cache its
        maximum-entropy bottom-up path (ties to the smallest leaf id)."""
        h = self.h
        best_entropy = -1.0
        best_leaf = -1
        stack = [(root, 1.0, 0.0)]
        while stack:
            node, cont_prod, ent_acc = stack.pop()
            q = self.p[node] * cont_prod
            self.q[node] = q
            ent = ent_acc + _entropy_term(q)
            if self.is_effective_leaf(node):
                if ent > best_entropy or (ent == best_entropy and node < best_leaf):
                    best_entropy = ent
                    best_leaf = node
            else:
                nxt = cont_prod * (1.0 - self.p[node])
                stack.append((h.left[node], nxt, ent))
                stack.append((h.right[node], nxt, ent))
        self.forest[root] = _TreeEntry(root, best_entropy, best_leaf)

    # -- selection -------------------------------------------------------

    def select_max_entropy_path(self) -> list[int]:
        """Bottom-up node path (leaf to subtree root) of maximum entropy."""
        if not self.forest:
            raise EmptyForestError("no unresolved subtrees")
        best: Optional[_TreeEntry] = None
        for entry in self.forest.values():
            if (
                best is None
                or entry.best_entropy > best.best_entropy
                or (
                    entry.best_entropy == best.best_entropy
                    and entry.best_leaf < best.best_leaf
                )
            ):
                best = entry
        path = [best.best_leaf]
        cur = best.best_leaf
        while cur != best.root:
            cur = self.h.parent[cur]
            path.append(cur)
        return path

    def path_mass_error(self, root: int) -> float:
        """Max |1 - sum of edge masses| over the subtree's leaf paths."""
        h = self.h
        worst = 0.0
        stack = [(root, 0.0)]
        while stack:
            node, acc = stack.pop()
            acc += self.q[node]
            if self.is_effective_leaf(node):
                worst = max(worst, abs(1.0 - acc))
            else:
                stack.append((h.left[node], acc))
                stack.append((h.right[node], acc))
        return worst

    # -- binary search ---------------------------------------------------

    def weighted_binary_search(
        self, path: list[int], labeler: Callable[[int], int]
    ) -> tuple[int, int, int]:
        """Find the path node u with label 1 whose parent has label 0.

        Probes the mass-weighted midpoint of the open segment each step.
        Returns (u, queries made, contradictions seen).
        """
        lo, hi = 0, len(path) - 1
        queries = 0
        contradictions = 0
        while lo != hi:
            mass = [self.q[path[t]] for t in range(lo, hi)]
            half = sum(mass) / 2.0
            prefix = 0.0
            best_k = lo
            best_gap = float("inf")
            for off, m in enumerate(mass):
                prefix += m
                gap = abs(half - prefix)
                if gap < best_gap:
                    best_gap = gap
                    best_k = lo + off
            probe = path[best_k + 1]
            if self.label[probe] is not None:
                contradictions += 1
                answer = self.label[probe]
            else:
                answer = labeler(probe)
                queries += 1
                self.label[probe] = answer
            if answer == 0:
                hi = best_k
            else:
                lo = best_k + 1
        return path[lo], queries, contradictions

    # -- update ------------------------------------------------------------

    def apply_cut_update(self, u: int, path: list[int]) -> None:
        """Resolve the searched path: emit L(u), split off sibling subtrees."""
        h = self.h
        u_idx = path.index(u)
        root = path[-1]
        del self.forest[root]

        self._mark_subtree_resolved(u)
        self.q[u] = 1.0
        self.emitted.append(u)

        for t in range(u_idx + 1, len(path)):
            j = path[t]
            self.p[j] = 0.0
            self.label[j] = 0
            self.q[j] = 0.0
            below = path[t - 1]
            j_c = h.right[j] if h.left[j] == below else h.left[j]
            if self.is_effective_leaf(j_c):
                self.emitted.append(j_c)
                self.q[j_c] = 1.0
            else:
                self._init_tree(j_c)
                if self.validate_mass:
                    self.max_mass_error = max(
                        self.max_mass_error, self.path_mass_error(j_c)
                    )

    def _mark_subtree_resolved(self, node: int) -> None:
        h = self.h
        stack = [node]
        while stack:
            i = stack.pop()
            self.p[i] = 1.0
            self.label[i] = 1
            if not self.frozen_one[i] and h.is_internal(i):
                stack.append(h.left[i])
                stack.append(h.right[i])

    def posterior(self) -> Prior:
        return Prior(list(self.p))

    def advance(self, labeler: Callable[[int], int], search_idx: int) -> SearchRecord:
        """One full round: select a path, search it, apply the update."""
        path = self.select_max_entropy_path()
        masses = [self.q[i] for i in path]
        total_mass = sum(masses)
        entropy = sum(_entropy_term(q) for q in masses)
        normalized = (
            sum(_entropy_term(q / total_mass) for q in masses)
            if total_mass > 0.0
            else 0.0
        )
        u, n_queries, n_contra = self.weighted_binary_search(path, labeler)
        record = SearchRecord(
            search_idx=search_idx,
            path_leaf=path[0],
            path_len=len(path),
            entropy=entropy,
            normalized_entropy=normalized,
            queries=n_queries,
            cut_node=u,
            edge_mass=masses[path.index(u)],
            contradictions=n_contra,
        )
        self.apply_cut_update(u, path)
        return record


def run_wdp(
    h: Hierarchy,
    prior: Prior,
    labeler: Callable[[int], int],
    frozen_one: Optional[list[bool]] = None,
    validate_mass: bool = False,
) -> WdpResult:
    """Run the dichotomic path learner to completion.

    ``labeler`` answers node labels (0 above the cut, 1 below).
    """
    state = WdpState(h, prior, frozen_one)
    state.validate_mass = validate_mass
    searches: list[SearchRecord] = []
    while state.forest:
        record = state.advance(labeler, len(searches) + 1)
        searches.append(record)
    cut = Cut(state.emitted)
    return WdpResult(
        cut=cut,
        clustering=cut_to_clustering(h, cut),
        searches=searches,
        queries=sum(r.queries for r in searches),
        contradictions=sum(r.contradictions for r in searches),
        max_mass_error=state.max_mass_error,
    )


# ---------------------------------------------------------------------------
# Noise-robust variant
# ---------------------------------------------------------------------------


@dataclass
class NwdpConfig:
    lam: float
    delta: float
    alpha: float = 2.0
    vote_multiplier: float = 2.0
    query_budget: Optional[int] = None

    def __post_init__(self):
        if not (0.0 <= self.lam < 0.5):
            raise ValueError(f"noise level must be in [0, 0.5), got {self.lam}")
        if not (0.0 < self.delta < 0.5):
            raise ValueError(f"delta must be in (0, 0.5), got {self.delta}")
        if self.query_budget is not None and self.query_budget < 0:
            raise ValueError("budget must be nonnegative")

    def small_node_threshold(self, n: int) -> float:
        return self.alpha * math.log(n / self.delta) / (1.0 - 2.0 * self.lam) ** 2

    def votes(self, n: int) -> int:
        return max(
            1,
            math.ceil(
                self.vote_multiplier
                * math.log(n / self.delta)
                / (1.0 - 2.0 * self.lam) ** 2
            ),
        )


@dataclass
class NwdpResult:
    cut: Cut
    clustering: Clustering
    searches: list[SearchRecord]
    queries: int
    contradictions: int
    budget_exhausted: bool
    votes_per_label: int
    frozen_roots: list[int]
    max_frozen_size: int


def preprocess_small_nodes(h: Hierarchy, cfg: NwdpConfig) -> list[bool]:
    """Mark as resolved every node at or under an internal node with fewer
    cross pairs than the vote-reliability threshold; marks close downward."""
    threshold = cfg.small_node_threshold(h.n)
    frozen = [False] * h.n_nodes
    for i in h._topo_order():
        p = h.parent[i]
        if p >= 0 and frozen[p]:
            frozen[i] = True
        elif h.is_leaf(i):
            frozen[i] = True
        elif h.leaf_count(h.left[i]) * h.leaf_count(h.right[i]) < threshold:
            frozen[i] = True
    return frozen


def run_nwdp(
    h: Hierarchy,
    prior: Prior,
    oracle: PairOracle,
    cfg: NwdpConfig,
    rng,
    validate_mass: bool = False,
    on_state: Optional[Callable[["WdpState"], None]] = None,
) -> NwdpResult:
    """Noise-robust run: small-node preprocessing + majority-vote labels.

    If the pair-query budget runs out mid-run, the run stops and the
    maximum-a-posteriori cut of the posterior reached so far is returned.
    """
    frozen = preprocess_small_nodes(h, cfg)
    frozen_roots = [
        i
        for i in range(h.n_nodes)
        if frozen[i] and (h.parent[i] < 0 or not frozen[h.parent[i]])
    ]
    max_frozen_size = max(
        (h.leaf_count(i) for i in frozen_roots if h.is_internal(i)), default=0
    )
    votes = cfg.votes(h.n)
    labeler = NodeLabeler(oracle, h, rng, votes=votes, budget=cfg.query_budget)

    prior_eff = prior.copy()
    for i in range(h.n_nodes):
        if frozen[i]:
            prior_eff.values[i] = 1.0

    state = WdpState(h, prior_eff, frozen)
    state.validate_mass = validate_mass
    if on_state is not None:
        on_state(state)
    searches: list[SearchRecord] = []
    budget_exhausted = False
    try:
        while state.forest:
            searches.append(state.advance(labeler, len(searches) + 1))
    except BudgetExhaustedError:
        budget_exhausted = True

    if budget_exhausted:
        cut = map_cut(h, state.posterior())
    else:
        cut = Cut(state.emitted)

    return NwdpResult(
        cut=cut,
        clustering=cut_to_clustering(h, cut),
        searches=searches,
        queries=labeler.queries_used,
        contradictions=sum(r.contradictions for r in searches),
        budget_exhausted=budget_exhausted,
        votes_per_label=votes,
        frozen_roots=frozen_roots,
        max_frozen_size=max_frozen_size,
    )


def write_trace_csv(searches: list[SearchRecord], path: str) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "search_idx",
                "path_leaf",
                "path_len",
                "entropy",
                "normalized_entropy",
                "queries",
                "cut_node",
            ]
        )
        for r in searches:
            writer.writerow(
                [
                    r.search_idx,
                    r.path_leaf,
                    r.path_len,
                    f"{r.entropy:.6f}",
                    f"{r.normalized_entropy:.6f}",
                    r.queries,
                    r.cut_node,
                ]
            )
