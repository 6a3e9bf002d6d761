"""Prior/posterior distributions over tree cuts and cut-level measures.

A prior assigns each node the conditional probability that the hidden cut
passes just above it, given that all its ancestors sit above the cut.  The
probability of a full cut is the product of per-node stop/continue factors;
leaves always carry probability 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence

from .errors import BudgetTooLargeError, InvalidCutError
from .hierarchy import Cut, Hierarchy, validate_cut

# Probability floor used when a distribution must stay strictly inside (0,1).
EPS_FLOOR = 1e-6

_LOG_CLAMP = 1e-300


@dataclass
class Prior:
    """Per-node stop probabilities; values[i] is 1.0 for every leaf i."""

    values: list[float]

    def copy(self) -> "Prior":
        return Prior(list(self.values))

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    def validate(self, h: Hierarchy, strict_interior: bool = False) -> None:
        if len(self.values) != h.n_nodes:
            raise ValueError("prior length does not match node count")
        for i in range(h.n):
            if self.values[i] != 1.0:
                raise ValueError(f"leaf {i} must have probability 1")
        for i in h.internal_nodes():
            v = self.values[i]
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"node {i} probability {v} outside [0,1]")
            if strict_interior and not (0.0 < v < 1.0):
                raise ValueError(f"node {i} probability {v} not in (0,1)")


def uniform_prior(h: Hierarchy, counts: Sequence[int]) -> Prior:
    """Prior giving every realized cut the same probability 1/N(T).

    Cut counts grow like 1.502^n, far past double range on big trees; stop
    probabilities whose true value underflows are floored at 1e-300 so the
    prior stays strictly positive.
    """
    values = [1.0] * h.n_nodes
    for i in h.internal_nodes():
        c = counts[i]
        values[i] = 1.0 / c if c.bit_length() < 1000 else 1e-300
    return Prior(values)


def constant_prior(h: Hierarchy, alpha: float) -> Prior:
    """Same stop probability everywhere; large alpha favors cuts near the root."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    values = [1.0] * h.n_nodes
    for i in h.internal_nodes():
        values[i] = alpha
    return Prior(values)


def node_statuses(h: Hierarchy, cut: Cut) -> list[int]:
    """Per-node position relative to a cut: 0 above, 1 boundary, 2 below."""
    members = set(validate_cut(h, cut))
    status = [0] * h.n_nodes
    for i in h._topo_order():
        p = h.parent[i]
        if p >= 0 and status[p] != 0:
            if i in members:
                raise InvalidCutError(f"node {i} lies under another cut member")
            status[i] = 2
        elif i in members:
            status[i] = 1
    return status


def cut_probability(h: Hierarchy, prior: Prior, cut: Cut) -> float:
    """Probability of a cut: continue factors above, stop factors on the boundary."""
    status = node_statuses(h, cut)
    p = 1.0
    for i in range(h.n_nodes):
        if status[i] == 0:
            p *= 1.0 - prior.values[i]
        elif status[i] == 1:
            p *= prior.values[i]
    return p


def uniform_cut_probability_exact(
    h: Hierarchy, counts: Sequence[int], cut: Cut
) -> Fraction:
    """Exact rational cut probability under the uniform prior."""
    status = node_statuses(h, cut)
    p = Fraction(1)
    for i in range(h.n_nodes):
        stop = Fraction(1) if h.is_leaf(i) else Fraction(1, counts[i])
        if status[i] == 0:
            p *= 1 - stop
        elif status[i] == 1:
            p *= stop
    return p


def sample_cut(h: Hierarchy, prior: Prior, rng) -> Cut:
    """Top-down sampling: stop at a node with its prior probability."""
    boundary = []
    stack = [h.root]
    while stack:
        i = stack.pop()
        if h.is_leaf(i) or rng.random() < prior.values[i]:
            boundary.append(i)
        else:
            stack.append(h.left[i])
            stack.append(h.right[i])
    return Cut(boundary)


def search_complexity(h: Hierarchy, cut: Cut) -> int:
    """Leaf count of the tree spanned by internal nodes at or above the cut.

    This is the number of path searches an entropy-guided dichotomic run
    performs, and never exceeds the number of clusters.
    """
    status = node_statuses(h, cut)
    # Node belongs to the collapsed tree iff above the cut, or an internal
    # boundary node.  Count members with no member child.
    def in_set(i: int) -> bool:
        return status[i] == 0 or (status[i] == 1 and h.is_internal(i))

    count = 0
    for i in range(h.n_nodes):
        if not in_set(i):
            continue
        if h.is_leaf(i) or not (in_set(h.left[i]) or in_set(h.right[i])):
            count += 1
    return count


def sibling_leaf_count(h: Hierarchy) -> int:
    """Number of internal nodes whose two children are both leaves."""
    return sum(
        1
        for i in h.internal_nodes()
        if h.is_leaf(h.left[i]) and h.is_leaf(h.right[i])
    )


@dataclass
class AdversarialPrior:
    """Hard prior used by lower-bound experiments.

    ``frontier`` holds the B internal nodes whose coin flips define the
    2^B supported cuts; ``expanded`` the internal nodes grown above them.
    ``prior`` is the closest product-form encoding, with an EPS_FLOOR of
    probability mass escaping the support (the exact 2^B-uniform law is
    generally not expressible in product form, so experiments sample from
    the explicit support via :meth:`sample_cut`).
    """

    prior: Prior
    frontier: list[int]
    expanded: list[int]
    budget: int

    def sample_cut(self, h: Hierarchy, rng) -> Cut:
        boundary: list[int] = []
        for node in self.frontier:
            if rng.random() < 0.5:
                boundary.append(node)
            else:
                boundary.append(h.left[node])
                boundary.append(h.right[node])
        for node in self.expanded:
            for c in (h.left[node], h.right[node]):
                if h.is_leaf(c):
                    boundary.append(c)
        return Cut(boundary)

    def support_size(self) -> int:
        return 1 << self.budget


def adversarial_prior(h: Hierarchy, budget: int, rng=None) -> AdversarialPrior:
    """Grow a breadth-first subtree with exactly ``budget`` frontier nodes.

    Each frontier node independently either joins the boundary itself or
    sends both its children there, yielding 2^budget equally likely cuts
    whose search complexity lies in [budget, 2*budget].
    """
    max_budget = sibling_leaf_count(h)
    if not (1 <= budget <= max_budget):
        raise BudgetTooLargeError(
            f"budget {budget} outside [1, {max_budget}] for this tree"
        )
    if h.is_leaf(h.root):
        raise BudgetTooLargeError("tree has a single leaf")

    expanded: list[int] = []
    frontier_final: list[int] = []
    queue = [h.root]
    count = 1
    qi = 0
    while count < budget:
        node = queue[qi]
        qi += 1
        internal_children = [
            c for c in (h.left[node], h.right[node]) if h.is_internal(c)
        ]
        if not internal_children:
            frontier_final.append(node)
            continue
        expanded.append(node)
        queue.extend(internal_children)
        count += len(internal_children) - 1
    frontier = frontier_final + queue[qi:]
    assert len(frontier) == budget

    values = [1.0] * h.n_nodes
    frontier_set = set(frontier)
    expanded_set = set(expanded)
    for i in h.internal_nodes():
        if i in expanded_set:
            values[i] = EPS_FLOOR
        elif i in frontier_set:
            values[i] = 0.5
        else:
            # Below the frontier (or dangling): stop immediately w.h.p. so
            # that frontier coin flips dominate the distribution.
            values[i] = 1.0 - EPS_FLOOR
    return AdversarialPrior(
        prior=Prior(values),
        frontier=sorted(frontier),
        expanded=sorted(expanded),
        budget=budget,
    )


def map_cut(h: Hierarchy, posterior: Prior) -> Cut:
    """Cut maximizing the posterior probability, by a log-space bottom-up DP.

    At each node the choice is stop (pay log p) or split (pay log(1-p) plus
    the children's best).  Ties prefer stopping, i.e. the shallower cut.
    """
    vals = posterior.values
    best = [0.0] * h.n_nodes
    stop_here = [True] * h.n_nodes
    for i in h.post_order():
        if h.is_leaf(i):
            best[i] = 0.0
            continue
        p = vals[i]
        stop_score = math.log(max(p, _LOG_CLAMP))
        split_score = (
            math.log(max(1.0 - p, _LOG_CLAMP)) + best[h.left[i]] + best[h.right[i]]
        )
        if stop_score >= split_score:
            best[i] = stop_score
            stop_here[i] = True
        else:
            best[i] = split_score
            stop_here[i] = False

    boundary = []
    stack = [h.root]
    while stack:
        i = stack.pop()
        if stop_here[i]:
            boundary.append(i)
        else:
            stack.append(h.left[i])
            stack.append(h.right[i])
    return Cut(boundary)


# ---------------------------------------------------------------------------
# Prior file format
# ---------------------------------------------------------------------------


def prior_to_dict(prior: Prior, kind: str = "explicit", alpha: Optional[float] = None) -> dict[str, Any]:
    if kind == "uniform":
        return {"kind": "uniform"}
    if kind == "constant":
        return {"kind": "constant", "alpha": alpha}
    return {"kind": "explicit", "values": list(prior.values)}


def prior_from_dict(data: dict[str, Any], h: Hierarchy, counts: Optional[Sequence[int]] = None) -> Prior:
    kind = data.get("kind", "uniform")
    if kind == "uniform":
        if counts is None:
            from .hierarchy import count_cuts

            counts = count_cuts(h)
        return uniform_prior(h, counts)
    if kind == "constant":
        return constant_prior(h, float(data["alpha"]))
    if kind == "explicit":
        prior = Prior([float(v) for v in data["values"]])
        prior.validate(h)
        return prior
    raise ValueError(f"unknown prior kind {kind!r}")
