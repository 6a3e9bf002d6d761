"""Persistent pairwise-similarity answer sources.

All oracles are symmetric, reflexive and persistent: asking the same pair
twice always returns the same +/-1 answer, even for the noisy variants.
Every answer() call increments a query counter; experiment budgets are
accounted in these pair queries.
"""
from __future__ import annotations

import hashlib
import math
import random
import struct
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import LeafNodeError, LengthMismatchError
from .hierarchy import Clustering, Cut, Hierarchy, cut_to_clustering

EXACT_SUBSET_PAIR_LIMIT = 50_000_000


class PairOracle:
    """Base class: subclasses implement _answer(a, b) for a canonical a < b."""

    def __init__(self):
        self.queries = 0
        self._lock = threading.Lock()

    def answer(self, a: int, b: int) -> int:
        with self._lock:
            self.queries += 1
        if a == b:
            return 1
        if a > b:
            a, b = b, a
        return self._answer(a, b)

    def _answer(self, a: int, b: int) -> int:
        raise NotImplementedError

    def reset_counter(self) -> None:
        with self._lock:
            self.queries = 0


class PlantedOracle(PairOracle):
    """Ground truth consistent with a planted cut: +1 iff same cluster."""

    def __init__(self, h: Hierarchy, cut: Cut):
        super().__init__()
        self.h = h
        self.cut = cut
        clustering = cut_to_clustering(h, cut)
        self.cluster_id = [0] * h.n
        for idx, cluster in enumerate(clustering.clusters):
            for leaf in cluster:
                self.cluster_id[leaf] = idx
        self.clustering = clustering

    def _answer(self, a: int, b: int) -> int:
        return 1 if self.cluster_id[a] == self.cluster_id[b] else -1


class LabelOracle(PairOracle):
    """+1 iff the two leaves carry the same class label."""

    def __init__(self, labels: Sequence[int]):
        super().__init__()
        self.labels = list(labels)

    @classmethod
    def for_tree(cls, h: Hierarchy, labels: Sequence[int]) -> "LabelOracle":
        if len(labels) != h.n:
            raise LengthMismatchError(
                f"{len(labels)} labels for {h.n} leaves"
            )
        return cls(labels)

    def _answer(self, a: int, b: int) -> int:
        return 1 if self.labels[a] == self.labels[b] else -1

    def clustering(self) -> Clustering:
        groups: dict[int, list[int]] = {}
        for leaf, lab in enumerate(self.labels):
            groups.setdefault(lab, []).append(leaf)
        return Clustering(groups.values())


@dataclass
class NoiseConfig:
    lam: float
    seed: int = 0
    mode: str = "auto"  # exact-subset | bernoulli | auto

    def __post_init__(self):
        if not (0.0 <= self.lam < 0.5):
            raise ValueError(f"noise level must be in [0, 0.5), got {self.lam}")
        if self.mode not in ("exact-subset", "bernoulli", "auto"):
            raise ValueError(f"unknown noise mode {self.mode!r}")

    def resolve_mode(self, n: int) -> str:
        if self.mode != "auto":
            return self.mode
        return "exact-subset" if n * (n - 1) // 2 <= EXACT_SUBSET_PAIR_LIMIT else "bernoulli"


def pair_index(n: int, a: int, b: int) -> int:
    """Rank of unordered pair (a, b), a < b, in lexicographic order."""
    return a * (2 * n - a - 1) // 2 + (b - a - 1)


def pair_from_index(n: int, idx: int) -> tuple[int, int]:
    """Inverse of pair_index."""
    # a is the largest value with a*(2n-a-1)/2 <= idx
    a = int((2 * n - 1 - math.isqrt((2 * n - 1) ** 2 - 8 * idx)) // 2)
    while pair_index(n, a + 1, a + 2) <= idx:
        a += 1
    while pair_index(n, a, a + 1) > idx:
        a -= 1
    b = idx - a * (2 * n - a - 1) // 2 + a + 1
    return a, b


class NoisyOracle(PairOracle):
    """Wraps a base oracle with persistent symmetric label flips.

    exact-subset mode flips exactly floor(lam * C(n,2)) distinct pairs,
    chosen uniformly and materialized.  bernoulli mode flips each pair
    independently with probability lam, decided by a keyed hash of the
    canonical pair so that persistence needs no storage.
    """

    def __init__(self, base: PairOracle, cfg: NoiseConfig, n: int):
        super().__init__()
        self.base = base
        self.cfg = cfg
        self.n = n
        self.mode = cfg.resolve_mode(n)
        self._flips: Optional[frozenset[int]] = None
        if self.mode == "exact-subset":
            total = n * (n - 1) // 2
            k = int(cfg.lam * total)
            rng = random.Random(cfg.seed)
            self._flips = frozenset(rng.sample(range(total), k))
        else:
            self._key = struct.pack("<q", cfg.seed)
            self._threshold = cfg.lam

    def _flip(self, a: int, b: int) -> bool:
        if self.mode == "exact-subset":
            return pair_index(self.n, a, b) in self._flips
        digest = hashlib.blake2b(
            struct.pack("<qq", a, b), key=self._key, digest_size=8
        ).digest()
        u = struct.unpack("<Q", digest)[0] / 2.0**64
        return u < self._threshold

    def _answer(self, a: int, b: int) -> int:
        true = self.base._answer(a, b)
        return -true if self._flip(a, b) else true

    def flipped_pairs(self) -> list[tuple[int, int]]:
        """Materialized flip list (exact-subset mode only)."""
        if self.mode != "exact-subset":
            raise ValueError("flip list only available in exact-subset mode")
        return [pair_from_index(self.n, idx) for idx in sorted(self._flips)]

    def flip_count(self) -> int:
        if self.mode != "exact-subset":
            raise ValueError("flip count only exact in exact-subset mode")
        return len(self._flips)


def planted_oracle(h: Hierarchy, cut: Cut) -> PlantedOracle:
    return PlantedOracle(h, cut)


def noisy_oracle(base: PairOracle, cfg: NoiseConfig, n: int) -> PairOracle:
    if cfg.lam == 0.0:
        return base
    return NoisyOracle(base, cfg, n)


def label_oracle(labels: Sequence[int]) -> LabelOracle:
    return LabelOracle(labels)


# ---------------------------------------------------------------------------
# Node labels from pair queries
# ---------------------------------------------------------------------------


def majority_node_label(
    oracle: PairOracle, h: Hierarchy, i: int, m: int, rng
) -> int:
    """Majority vote over m cross pairs of node i; ties resolve to 0 (above).

    Pairs are drawn without replacement; m is capped at the number of
    available cross pairs.
    """
    if h.is_leaf(i):
        raise LeafNodeError(f"node {i} is a leaf")
    if m < 1:
        raise ValueError("need at least one vote")
    l, r = h.left[i], h.right[i]
    nl = h.leaf_count(l)
    nr = h.leaf_count(r)
    total = nl * nr
    m_eff = min(m, total)
    if m_eff == total:
        indices = range(total)
    else:
        indices = rng.sample(range(total), m_eff)
    positives = 0
    for idx in indices:
        a = h.leaf_order[h.leaf_lo[l] + idx // nr]
        b = h.leaf_order[h.leaf_lo[r] + idx % nr]
        if oracle.answer(a, b) == 1:
            positives += 1
    return 1 if 2 * positives > m_eff else 0


def majority_vote_cost(h: Hierarchy, i: int, m: int) -> int:
    """Pair queries a majority vote at node i will consume."""
    return min(m, h.leaf_count(h.left[i]) * h.leaf_count(h.right[i]))


class NodeLabeler:
    """Answers node-label requests through pair queries on an oracle.

    votes=1 asks a single uniformly drawn cross pair (exact in the
    noiseless realizable case); votes=m takes a majority.  An optional
    budget (in pair queries) makes the labeler raise BudgetExhaustedError
    before starting a vote that would overrun it.
    """

    def __init__(
        self,
        oracle: PairOracle,
        h: Hierarchy,
        rng,
        votes: int = 1,
        budget: Optional[int] = None,
    ):
        self.oracle = oracle
        self.h = h
        self.rng = rng
        self.votes = votes
        self.budget = budget
        self._start = oracle.queries

    @property
    def queries_used(self) -> int:
        return self.oracle.queries - self._start

    def __call__(self, node: int) -> int:
        cost = majority_vote_cost(self.h, node, self.votes)
        if self.budget is not None and self.queries_used + cost > self.budget:
            from .errors import BudgetExhaustedError

            raise BudgetExhaustedError(
                f"vote at node {node} needs {cost} queries, "
                f"{self.budget - self.queries_used} left"
            )
        return majority_node_label(self.oracle, self.h, node, self.votes, self.rng)
