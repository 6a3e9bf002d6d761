"""Incremental weighted ERM over all tree cuts, and the selective sampler.

The engine stores one record per internal node: six signed inter-cluster
weight accumulators (left/middle/right, split by sign) and two intra-cluster
cost accumulators.  A node is flagged as a cluster when the signed sum of
its six weight fields is nonnegative, i.e. when merging its leaves beats
keeping the children's optimal sub-clusterings.  Adding a weighted pair
touches exactly the nodes between the pair's LCA and the root, so the cost
of the optimal clustering is maintained in O(depth of lca) per update.

The sampler streams random leaf pairs; for each it compares the optimal
cost with the cost under the opposite same/different constraint (probed by
a +/-infinity weight that is rolled back), turns the gap into a query
probability, and on querying feeds the importance-weighted label back in.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from .errors import SameLeafError
from .hierarchy import Clustering, Cut, Hierarchy, LcaIndex
from .oracles import PairOracle

_NEG, _POS = 0, 1


class ErmEngine:
    """Per-node weight records supporting incremental min-cost clustering."""

    __slots__ = (
        "h",
        "lca",
        "wl",
        "wm",
        "wr",
        "cost_l",
        "cost_r",
        "is_cluster",
        "current_tot_cost",
        "total_abs_weight",
        "rounds",
        "queries",
        "last_path_len",
        "extraction_visits",
    )

    def __init__(self, h: Hierarchy, lca: Optional[LcaIndex] = None):
        self.h = h
        self.lca = lca if lca is not None else LcaIndex(h)
        m = h.n_nodes
        # Signed accumulators: [neg, pos] per node; negatives stored <= 0.
        self.wl = [[0.0, 0.0] for _ in range(m)]
        self.wm = [[0.0, 0.0] for _ in range(m)]
        self.wr = [[0.0, 0.0] for _ in range(m)]
        self.cost_l = [0.0] * m
        self.cost_r = [0.0] * m
        self.is_cluster = [1 if h.is_leaf(i) else 0 for i in range(m)]
        self.current_tot_cost = 0.0
        self.total_abs_weight = 0.0
        self.rounds = 0
        self.queries = 0
        self.last_path_len = 0
        self.extraction_visits = 0

    # -- record primitives -------------------------------------------------

    def _s(self, v: int) -> float:
        return (
            self.wl[v][0]
            + self.wl[v][1]
            + self.wm[v][0]
            + self.wm[v][1]
            + self.wr[v][0]
            + self.wr[v][1]
        )

    def add_weight(self, l1: int, l2: int, w: float) -> float:
        """Add weight w to the pair and return the new optimal total cost.

        Touches exactly the nodes on the path from lca(l1, l2) to the root.
        """
        if l1 == l2:
            raise SameLeafError(f"pair ({l1}, {l2})")
        h = self.h
        a = self.lca.lca(l1, l2)
        self.last_path_len = h.depth[a] + 1

        self.wm[a][_POS if w >= 0 else _NEG] += w
        self.is_cluster[a] = 1 if self._s(a) >= 0.0 else 0

        while a != h.root:
            par = h.parent[a]
            side_l = h.left[par] == a
            if self.is_cluster[a]:
                new_w = (0.0, 0.0)
                new_cost = (
                    self.cost_l[a]
                    - self.wl[a][_NEG]
                    - self.wm[a][_NEG]
                    - self.wr[a][_NEG]
                    + self.cost_r[a]
                )
            else:
                new_w = (
                    self.wl[a][_NEG] + self.wm[a][_NEG] + self.wr[a][_NEG],
                    self.wl[a][_POS] + self.wm[a][_POS] + self.wr[a][_POS],
                )
                new_cost = self.cost_l[a] + self.cost_r[a]
            if side_l:
                self.wl[par][_NEG], self.wl[par][_POS] = new_w
                self.cost_l[par] = new_cost
            else:
                self.wr[par][_NEG], self.wr[par][_POS] = new_w
                self.cost_r[par] = new_cost
            self.is_cluster[par] = 1 if self._s(par) >= 0.0 else 0
            a = par

        r = h.root
        if self.is_cluster[r]:
            cost = (
                self.cost_l[r]
                - self.wl[r][_NEG]
                - self.wm[r][_NEG]
                - self.wr[r][_NEG]
                + self.cost_r[r]
            )
        else:
            cost = (
                self.cost_l[r]
                + self.wl[r][_POS]
                + self.wm[r][_POS]
                + self.wr[r][_POS]
                + self.cost_r[r]
            )
        self.current_tot_cost = cost
        self.total_abs_weight += abs(w)
        return cost

    def same_cluster(self, l1: int, l2: int) -> bool:
        """Whether the current optimal clustering joins the two leaves."""
        if l1 == l2:
            raise SameLeafError(f"pair ({l1}, {l2})")
        h = self.h
        a = self.lca.lca(l1, l2)
        while a != h.root and not self.is_cluster[a]:
            a = h.parent[a]
        return bool(self.is_cluster[a])

    # -- constrained probe with rollback ------------------------------------

    def snapshot_path(self, l1: int, l2: int) -> list:
        h = self.h
        a = self.lca.lca(l1, l2)
        snap = []
        node = a
        while True:
            snap.append(
                (
                    node,
                    self.wl[node][0],
                    self.wl[node][1],
                    self.wm[node][0],
                    self.wm[node][1],
                    self.wr[node][0],
                    self.wr[node][1],
                    self.cost_l[node],
                    self.cost_r[node],
                    self.is_cluster[node],
                )
            )
            if node == h.root:
                break
            node = h.parent[node]
        return snap

    def restore_path(self, snap: list) -> None:
        for (
            node,
            wl_n,
            wl_p,
            wm_n,
            wm_p,
            wr_n,
            wr_p,
            c_l,
            c_r,
            flag,
        ) in snap:
            self.wl[node][0] = wl_n
            self.wl[node][1] = wl_p
            self.wm[node][0] = wm_n
            self.wm[node][1] = wm_p
            self.wr[node][0] = wr_n
            self.wr[node][1] = wr_p
            self.cost_l[node] = c_l
            self.cost_r[node] = c_r
            self.is_cluster[node] = flag

    def constrained_cost(self, l1: int, l2: int, force_same: bool) -> float:
        """Optimal cost with the pair forced same/different; state unchanged.

        The constraint is a weight of +/-(total absolute weight + 1), large
        enough to dominate every cut-cost difference, applied and rolled
        back exactly.
        """
        snap = self.snapshot_path(l1, l2)
        saved_cost = self.current_tot_cost
        saved_abs = self.total_abs_weight
        inf = self.total_abs_weight + 1.0
        cost = self.add_weight(l1, l2, inf if force_same else -inf)
        self.restore_path(snap)
        self.current_tot_cost = saved_cost
        self.total_abs_weight = saved_abs
        return cost

    # -- output ------------------------------------------------------------

    def current_cut(self) -> Cut:
        """Lower boundary of the optimal clustering: topmost cluster flags.

        Visits only the boundary and the nodes above it, so extraction is
        linear in the number of output clusters.
        """
        h = self.h
        boundary = []
        visits = 0
        stack = [h.root]
        while stack:
            v = stack.pop()
            visits += 1
            if self.is_cluster[v]:
                boundary.append(v)
            else:
                stack.append(h.left[v])
                stack.append(h.right[v])
        self.extraction_visits = visits
        return Cut(boundary)

    def current_clustering(self) -> Clustering:
        h = self.h
        return Clustering([h.leaves_under(i) for i in self.current_cut()])

    # -- persistence ---------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "wl": self.wl,
                "wm": self.wm,
                "wr": self.wr,
                "cost_l": self.cost_l,
                "cost_r": self.cost_r,
                "is_cluster": self.is_cluster,
                "current_tot_cost": self.current_tot_cost,
                "total_abs_weight": self.total_abs_weight,
                "rounds": self.rounds,
                "queries": self.queries,
            }
        )

    @classmethod
    def from_json(cls, h: Hierarchy, payload: str, lca: Optional[LcaIndex] = None) -> "ErmEngine":
        data = json.loads(payload)
        eng = cls(h, lca)
        eng.wl = [list(x) for x in data["wl"]]
        eng.wm = [list(x) for x in data["wm"]]
        eng.wr = [list(x) for x in data["wr"]]
        eng.cost_l = list(data["cost_l"])
        eng.cost_r = list(data["cost_r"])
        eng.is_cluster = list(data["is_cluster"])
        eng.current_tot_cost = data["current_tot_cost"]
        eng.total_abs_weight = data["total_abs_weight"]
        eng.rounds = data["rounds"]
        eng.queries = data["queries"]
        return eng


# ---------------------------------------------------------------------------
# Selective sampler
# ---------------------------------------------------------------------------


@dataclass
class SamplerConfig:
    delta: float = 0.05
    c1: float = 1.0
    c2: float = 1.0
    n_cuts_bits: int = 1  # bit length of the tree's exact cut count

    def log_term(self, t: int) -> float:
        inner = (self.n_cuts_bits * math.log(2.0) + math.log(1.0 / self.delta)) * max(
            math.log(t), 1.0
        )
        return math.log(inner)


@dataclass
class StepResult:
    t: int
    pair: tuple[int, int]
    d_t: float
    p_t: float
    queried: bool
    cost: float


def query_probability(cfg: SamplerConfig, t: int, d_t: float) -> float:
    """Eq.-style query probability; degenerate rounds force certainty."""
    if t <= 1 or d_t <= 0.0:
        return 1.0
    raw = (cfg.c1 / d_t**2 + cfg.c2 / d_t) * cfg.log_term(t) / t
    return min(1.0, raw)


def step(
    engine: ErmEngine,
    pair: tuple[int, int],
    cfg: SamplerConfig,
    oracle: PairOracle,
    rng,
) -> StepResult:
    """One selective-sampling round on the given pair."""
    l1, l2 = pair
    t = engine.rounds + 1
    pred_same = engine.same_cluster(l1, l2)
    constrained = engine.constrained_cost(l1, l2, force_same=not pred_same)
    if t == 1:
        d_t = 0.0
        p_t = 1.0
    else:
        d_t = (constrained - engine.current_tot_cost) / (t - 1)
        p_t = query_probability(cfg, t, d_t)
    queried = rng.random() < p_t
    if queried:
        sigma = oracle.answer(l1, l2)
        engine.add_weight(l1, l2, sigma / p_t)
        engine.queries += 1
    engine.rounds = t
    return StepResult(
        t=t, pair=pair, d_t=d_t, p_t=p_t, queried=queried, cost=engine.current_tot_cost
    )


def uniform_pair_stream(n: int, rng) -> Iterator[tuple[int, int]]:
    """Uniform over ordered pairs of distinct leaves."""
    while True:
        i = rng.randrange(n)
        j = rng.randrange(n - 1)
        if j >= i:
            j += 1
        yield (i, j)


@dataclass
class NrResult:
    clustering: Clustering
    cut: Cut
    trace: list[StepResult]
    rounds: int
    queries: int


def run_nr(
    h: Hierarchy,
    oracle: PairOracle,
    cfg: SamplerConfig,
    rng,
    max_rounds: Optional[int] = None,
    query_budget: Optional[int] = None,
    pair_stream: Optional[Iterator[tuple[int, int]]] = None,
    engine: Optional[ErmEngine] = None,
    collect_trace: bool = True,
    on_step: Optional[Callable[[ErmEngine, StepResult], None]] = None,
) -> NrResult:
    """Stream pairs through the sampler until a round or query budget hits."""
    if max_rounds is None and query_budget is None:
        raise ValueError("need a round or query budget")
    if engine is None:
        engine = ErmEngine(h)
    if pair_stream is None:
        pair_stream = uniform_pair_stream(h.n, rng)
    trace: list[StepResult] = []
    while True:
        if max_rounds is not None and engine.rounds >= max_rounds:
            break
        if query_budget is not None and engine.queries >= query_budget:
            break
        result = step(engine, next(pair_stream), cfg, oracle, rng)
        if collect_trace:
            trace.append(result)
        if on_step is not None:
            on_step(engine, result)
    cut = engine.current_cut()
    return NrResult(
        clustering=engine.current_clustering(),
        cut=cut,
        trace=trace,
        rounds=engine.rounds,
        queries=engine.queries,
    )


def write_trace_csv(trace: list[StepResult], path: str) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "pair_i", "pair_j", "d_t", "p_t", "queried", "cum_queries", "cost"]
        )
        cum = 0
        for r in trace:
            cum += 1 if r.queried else 0
            writer.writerow(
                [
                    r.t,
                    r.pair[0],
                    r.pair[1],
                    f"{r.d_t:.9f}",
                    f"{r.p_t:.9f}",
                    int(r.queried),
                    cum,
                    f"{r.cost:.9f}",
                ]
            )
