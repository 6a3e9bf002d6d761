"""Pairwise error metrics, the best-cut dynamic program, and excess risk.

Distances count ordered leaf pairs (i, j), i != j, whose same-cluster signs
disagree; fractions divide by n^2 to match the uniform pair distribution.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import UniverseMismatchError
from .hierarchy import Clustering, Cut, Hierarchy
from .oracles import LabelOracle, NoisyOracle, PairOracle, PlantedOracle


def _same_pairs_ordered(sizes) -> int:
    return sum(s * (s - 1) for s in sizes)


def clustering_hamming(a: Clustering, b: Clustering, n: int) -> int:
    """Ordered-pair Hamming distance between two partitions of 0..n-1."""
    la = a.labels(n)
    lb = b.labels(n)
    if (la < 0).any() or (lb < 0).any():
        raise UniverseMismatchError("clusterings do not cover 0..n-1")
    same_a = _same_pairs_ordered(np.bincount(la))
    same_b = _same_pairs_ordered(np.bincount(lb))
    cells = Counter(zip(la.tolist(), lb.tolist()))
    same_both = _same_pairs_ordered(cells.values())
    return same_a + same_b - 2 * same_both


Reference = Union[Clustering, Sequence[int], PairOracle]


def _reference_clustering(reference: Reference, n: int) -> Optional[Clustering]:
    if isinstance(reference, Clustering):
        return reference
    if isinstance(reference, PlantedOracle):
        return reference.clustering
    if isinstance(reference, LabelOracle):
        return reference.clustering()
    if isinstance(reference, PairOracle):
        return None
    labels = list(reference)
    if len(labels) != n:
        raise UniverseMismatchError(f"{len(labels)} labels for {n} leaves")
    groups: dict[int, list[int]] = {}
    for leaf, lab in enumerate(labels):
        groups.setdefault(lab, []).append(leaf)
    return Clustering(groups.values())


def hamming_distance(reference: Reference, candidate: Clustering, n: int) -> int:
    """Exact ordered-pair distance from a clustering-like or exact-noise
    reference to a candidate clustering.

    For a noisy oracle in exact-subset mode the distance to the underlying
    planted clustering is corrected flip by flip.  Bernoulli-mode oracles
    have no materialized flips; use :func:`estimate_hamming` instead.
    """
    if isinstance(reference, NoisyOracle):
        if reference.mode != "exact-subset":
            raise ValueError(
                "bernoulli noise has no exact distance; use estimate_hamming"
            )
        base = _reference_clustering(reference.base, n)
        if base is None:
            raise UniverseMismatchError("unsupported base oracle type")
        d = clustering_hamming(base, candidate, n)
        base_labels = base.labels(n)
        cand_labels = candidate.labels(n)
        for (i, j) in reference.flipped_pairs():
            true_same = base_labels[i] == base_labels[j]
            cand_same = cand_labels[i] == cand_labels[j]
            # The flip turns an agreeing pair into a disagreeing one and
            # vice versa; ordered pairs count twice.
            d += 2 if true_same == cand_same else -2
        return d
    ref = _reference_clustering(reference, n)
    if ref is None:
        raise UniverseMismatchError("unsupported reference type")
    return clustering_hamming(ref, candidate, n)


def estimate_hamming(
    oracle: PairOracle,
    candidate: Clustering,
    n: int,
    samples: int,
    rng,
) -> tuple[float, float]:
    """Monte Carlo ordered-pair distance and a 95% CI half-width."""
    labels = candidate.labels(n)
    disagree = 0
    for _ in range(samples):
        i = rng.randrange(n)
        j = rng.randrange(n - 1)
        if j >= i:
            j += 1
        sign = 1 if labels[i] == labels[j] else -1
        if oracle.answer(i, j) != sign:
            disagree += 1
    frac = disagree / samples
    half = 1.96 * (frac * (1 - frac) / samples) ** 0.5
    total = n * (n - 1)
    return frac * total, half * total


def pair_disagreement(
    reference: Reference, candidate: Clustering, n: int, pairs: Sequence[tuple[int, int]]
) -> float:
    """Fraction of the given pairs whose signs disagree (used for held-out
    validation/test evaluation; the reference may be any oracle)."""
    labels = candidate.labels(n)
    bad = 0
    if isinstance(reference, PairOracle):
        for (i, j) in pairs:
            sign = 1 if labels[i] == labels[j] else -1
            if reference.answer(i, j) != sign:
                bad += 1
    else:
        ref = _reference_clustering(reference, n)
        rl = ref.labels(n)
        for (i, j) in pairs:
            if (labels[i] == labels[j]) != (rl[i] == rl[j]):
                bad += 1
    return bad / len(pairs)


# ---------------------------------------------------------------------------
# Best cut in hindsight
# ---------------------------------------------------------------------------


@dataclass
class PairCountTable:
    """Per-node cross-pair positive/negative mass (unordered pairs/weights)."""

    middle_pos: np.ndarray
    middle_neg: np.ndarray

    @classmethod
    def from_labels(cls, h: Hierarchy, labels: Sequence[int]) -> "PairCountTable":
        """Class histograms give cross-pair positives in O(n * classes)."""
        if len(labels) != h.n:
            raise UniverseMismatchError(f"{len(labels)} labels for {h.n} leaves")
        classes = sorted(set(labels))
        cindex = {c: k for k, c in enumerate(classes)}
        hist = np.zeros((h.n_nodes, len(classes)), dtype=np.int64)
        mid_pos = np.zeros(h.n_nodes, dtype=np.float64)
        mid_neg = np.zeros(h.n_nodes, dtype=np.float64)
        for i in h.post_order():
            if h.is_leaf(i):
                hist[i, cindex[labels[i]]] = 1
            else:
                l, r = h.left[i], h.right[i]
                hist[i] = hist[l] + hist[r]
                pos = int(np.dot(hist[l], hist[r]))
                total = h.leaf_count(l) * h.leaf_count(r)
                mid_pos[i] = pos
                mid_neg[i] = total - pos
        return cls(middle_pos=mid_pos, middle_neg=mid_neg)

    @classmethod
    def from_oracle(cls, h: Hierarchy, oracle: PairOracle) -> "PairCountTable":
        """Brute-force table over all unordered pairs; O(n^2), test scale."""
        from .hierarchy import lca_naive

        mid_pos = np.zeros(h.n_nodes, dtype=np.float64)
        mid_neg = np.zeros(h.n_nodes, dtype=np.float64)
        for i in range(h.n):
            for j in range(i + 1, h.n):
                a = lca_naive(h, i, j)
                if oracle.answer(i, j) == 1:
                    mid_pos[a] += 1
                else:
                    mid_neg[a] += 1
        return cls(middle_pos=mid_pos, middle_neg=mid_neg)


@dataclass
class BestCut:
    cut: Cut
    clustering: Clustering
    d_h: float  # ordered-pair distance (2x the unordered DP cost)
    k: int


def best_cut(h: Hierarchy, reference) -> BestCut:
    """Minimum-distance realized cut via a bottom-up dynamic program.

    ``reference`` is a per-leaf label sequence or a PairCountTable.  At each
    node the choice is merging everything below (pay all negative mass
    inside) or splitting (children's best plus positive cross mass); ties
    split, so the reported cluster count is the largest among minimizers.
    """
    if isinstance(reference, PairCountTable):
        table = reference
    else:
        table = PairCountTable.from_labels(h, reference)

    all_neg = [0.0] * h.n_nodes
    cost = [0.0] * h.n_nodes
    merge_here = [False] * h.n_nodes
    for i in h.post_order():
        if h.is_leaf(i):
            continue
        l, r = h.left[i], h.right[i]
        all_neg[i] = all_neg[l] + all_neg[r] + table.middle_neg[i]
        split = cost[l] + cost[r] + table.middle_pos[i]
        if all_neg[i] < split:
            cost[i] = all_neg[i]
            merge_here[i] = True
        else:
            cost[i] = split

    boundary = []
    stack = [h.root]
    while stack:
        i = stack.pop()
        if h.is_leaf(i) or merge_here[i]:
            boundary.append(i)
        else:
            stack.append(h.left[i])
            stack.append(h.right[i])
    cut = Cut(boundary)
    from .hierarchy import cut_to_clustering

    clustering = cut_to_clustering(h, cut)
    return BestCut(cut=cut, clustering=clustering, d_h=2.0 * cost[h.root], k=clustering.k)


def excess_risk(
    h: Hierarchy, candidate: Clustering, reference: Reference, best: BestCut
) -> float:
    """Candidate's ordered-pair error beyond the best realized cut's, over n^2."""
    d = hamming_distance(reference, candidate, h.n)
    return (d - best.d_h) / (h.n * h.n)
