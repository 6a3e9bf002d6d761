"""Experiment orchestration: tree generators, tuning, budgeted runs, CSV out.

Budgets are accounted uniformly in pair queries: a majority vote of m pairs
costs m, so vote-based learners are charged honestly.  每 run owns its own
oracle and RNG derived from the trial seed, and rows are sorted before
writing so identical specs produce byte-identical CSVs.
"""
from __future__ import annotations

import csv
import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional

from .baselines import run_bf, run_erm
from .errors import BadSizeError, EmptyGridError
from .hierarchy import (
    Clustering,
    Cut,
    Hierarchy,
    build_hierarchy,
    count_cuts,
    cut_to_clustering,
)
from .metrics import BestCut, PairCountTable, best_cut, pair_disagreement
from .nr import SamplerConfig, run_nr
from .oracles import (
    NodeLabeler,
    NoiseConfig,
    PairOracle,
    PlantedOracle,
    label_oracle,
    noisy_oracle,
)
from .priors import Prior, constant_prior, sample_cut, uniform_prior
from .treeio import load_tree
from .wdp import NwdpConfig, run_nwdp


# ---------------------------------------------------------------------------
# Tree generators
# ---------------------------------------------------------------------------


def generate_tree(kind: str, n: int, seed: int = 0) -> Hierarchy:
    """Deterministic synthetic trees: full, line, or random recursive split."""
    if n < 2:
        raise BadSizeError(f"need n >= 2, got {n}")
    if kind == "full":
        if n & (n - 1) != 0:
            raise BadSizeError(f"full tree needs a power of two, got {n}")
        return _tree_from_splits(n, lambda lo, hi, rng: (lo + hi) // 2, None)
    if kind == "line":
        return _tree_from_splits(n, lambda lo, hi, rng: lo + 1, None)
    if kind == "random":
        rng = random.Random(seed)
        return _tree_from_splits(n, lambda lo, hi, rng: rng.randint(lo + 1, hi - 1), rng)
    raise BadSizeError(f"unknown tree kind {kind!r}")


def _tree_from_splits(n: int, split, rng) -> Hierarchy:
    parents: list[Optional[int]] = [None] * (2 * n - 1)
    next_id = [n]

    def build(lo: int, hi: int) -> int:
        if hi - lo == 1:
            return lo
        node = next_id[0]
        next_id[0] += 1
        mid = split(lo, hi, rng)
        left = build(lo, mid)
        right = build(mid, hi)
        parents[left] = node
        parents[right] = node
        return node

    # Deep line trees need an explicit stack; emulate recursion iteratively.
    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 2 * n + 100))
    try:
        build(0, n)
    finally:
        sys.setrecursionlimit(old)
    return build_hierarchy(parents)


def random_cut(h: Hierarchy, rng, stop_prob: float = 0.35) -> Cut:
    """Planted cut for synthetic instances: stop at internal nodes with a
    fixed probability (leaves always stop)."""
    boundary = []
    stack = [h.root]
    while stack:
        i = stack.pop()
        if h.is_leaf(i) or rng.random() < stop_prob:
            boundary.append(i)
        else:
            stack.append(h.left[i])
            stack.append(h.right[i])
    return Cut(boundary)


def uniform_cluster_cut(h: Hierarchy, k: int) -> Cut:
    """On a full binary tree: the cut with k equal clusters (k a power of 2)."""
    if k & (k - 1) != 0:
        raise BadSizeError("cluster count must be a power of two")
    nodes = [h.root]
    while len(nodes) < k:
        nxt = []
        for i in nodes:
            if h.is_leaf(i):
                raise BadSizeError(f"tree too small for {k} clusters")
            nxt.append(h.left[i])
            nxt.append(h.right[i])
        nodes = nxt
    return Cut(nodes)


# ---------------------------------------------------------------------------
# Experiment specification
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    tree: dict[str, Any]
    oracle: dict[str, Any]
    algorithms: dict[str, dict[str, Any]]
    budgets: list[int]
    trials: int = 10
    seed: int = 0
    validation_size: int = 500
    test_pairs: int = 20000
    nr_max_rounds_factor: int = 100

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentSpec":
        spec = cls(
            tree=data["tree"],
            oracle=data["oracle"],
            algorithms=data["algorithms"],
            budgets=[int(b) for b in data["budgets"]],
            trials=int(data.get("trials", 10)),
            seed=int(data.get("seed", 0)),
            validation_size=int(data.get("validation_size", 500)),
            test_pairs=int(data.get("test_pairs", 20000)),
            nr_max_rounds_factor=int(data.get("nr_max_rounds_factor", 100)),
        )
        if spec.trials < 1:
            raise ValueError("trials must be >= 1")
        if sorted(spec.budgets) != spec.budgets:
            raise ValueError("budgets must be ascending")
        return spec

    def to_dict(self) -> dict[str, Any]:
        return {
            "tree": self.tree,
            "oracle": self.oracle,
            "algorithms": self.algorithms,
            "budgets": self.budgets,
            "trials": self.trials,
            "seed": self.seed,
            "validation_size": self.validation_size,
            "test_pairs": self.test_pairs,
            "nr_max_rounds_factor": self.nr_max_rounds_factor,
        }


def build_tree(spec_tree: dict[str, Any]) -> Hierarchy:
    if "file" in spec_tree:
        return load_tree(spec_tree["file"])
    return generate_tree(
        spec_tree.get("kind", "random"),
        int(spec_tree["n"]),
        int(spec_tree.get("seed", 0)),
    )


@dataclass
class TrialInstance:
    h: Hierarchy
    oracle: PairOracle
    prior: Prior
    best: BestCut
    validation: list[tuple[int, int]]
    test: list[tuple[int, int]]
    seed: int


def make_prior(h: Hierarchy, spec: dict[str, Any]) -> Prior:
    kind = spec.get("prior", "uniform")
    if kind == "uniform":
        return uniform_prior(h, count_cuts(h))
    if kind == "constant":
        return constant_prior(h, float(spec.get("alpha", 0.5)))
    raise ValueError(f"unknown prior {kind!r}")


def make_instance(h: Hierarchy, spec: ExperimentSpec, trial: int) -> TrialInstance:
    """Oracle, reference cut and held-out pair samples for one trial."""
    seed = spec.seed * 1_000_003 + trial
    rng = random.Random(seed)
    ospec = spec.oracle
    kind = ospec.get("kind", "planted")
    prior = make_prior(h, ospec)

    if kind == "planted":
        if "clusters" in ospec:
            cut = uniform_cluster_cut(h, int(ospec["clusters"]))
        elif ospec.get("cut") == "prior":
            cut = sample_cut(h, prior, rng)
        else:
            cut = random_cut(h, rng, float(ospec.get("stop_prob", 0.35)))
        base: PairOracle = PlantedOracle(h, cut)
        lam = float(ospec.get("lam", 0.0))
        if lam > 0.0:
            cfg = NoiseConfig(
                lam=lam, seed=seed, mode=ospec.get("noise_mode", "auto")
            )
            oracle = noisy_oracle(base, cfg, h.n)
        else:
            oracle = base
        table = PairCountTable.from_oracle(h, oracle) if h.n <= 512 else None
        if table is not None:
            ref_best = best_cut(h, table)
            oracle.reset_counter()
        else:
            # Large noisy instances: the planted cut is optimal for lam<1/2
            # up to vanishing terms; report its distance instead.
            from .metrics import hamming_distance

            clustering = cut_to_clustering(h, cut)
            d = hamming_distance(oracle, clustering, h.n)
            ref_best = BestCut(
                cut=cut, clustering=clustering, d_h=float(d), k=clustering.k
            )
            oracle.reset_counter()
    elif kind == "labels":
        labels = ospec["labels"]
        if isinstance(labels, str):
            labels = _read_labels_csv(labels, h.n)
        oracle = label_oracle(labels)
        ref_best = best_cut(h, labels)
    else:
        raise ValueError(f"unknown oracle kind {kind!r}")

    pair_rng = random.Random(seed ^ 0x5EED)
    validation = _sample_pairs(h.n, spec.validation_size, pair_rng)
    exclude = set(validation)
    test = []
    while len(test) < spec.test_pairs:
        p = _sample_pair(h.n, pair_rng)
        if p not in exclude:
            test.append(p)
    return TrialInstance(
        h=h,
        oracle=oracle,
        prior=prior,
        best=ref_best,
        validation=validation,
        test=test,
        seed=seed,
    )


def _sample_pair(n: int, rng) -> tuple[int, int]:
    i = rng.randrange(n)
    j = rng.randrange(n - 1)
    if j >= i:
        j += 1
    return (min(i, j), max(i, j))


def _sample_pairs(n: int, k: int, rng) -> list[tuple[int, int]]:
    return [_sample_pair(n, rng) for _ in range(k)]


def _read_labels_csv(path: str, n: int) -> list[int]:
    labels = [0] * n
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            labels[int(row[0])] = int(row[1])
    return labels


# ---------------------------------------------------------------------------
# Algorithm runners (budgeted, uniformly metered)
# ---------------------------------------------------------------------------


def run_algorithm(
    name: str,
    params: dict[str, Any],
    inst: TrialInstance,
    budget: int,
    rng,
) -> tuple[Clustering, int]:
    """Run one algorithm to a pair-query budget; returns output + queries."""
    h = inst.h
    oracle = inst.oracle
    start = oracle.queries
    if name == "wdp":
        # Noiseless path search: no preprocessing, one pair per node label.
        name = "nwdp"
        params = dict(params, lam=0.0, alpha=0.0, vote_multiplier=0.0)
    if name == "nwdp":
        cfg = NwdpConfig(
            lam=float(params.get("lam", 0.0)),
            delta=float(params.get("delta", 0.05)),
            alpha=float(params.get("alpha", 2.0)),
            vote_multiplier=float(params.get("vote_multiplier", 2.0)),
            query_budget=budget,
        )
        res = run_nwdp(h, inst.prior, oracle, cfg, rng)
        return res.clustering, oracle.queries - start
    if name == "nr":
        counts_bits = count_cuts(h)[h.root].bit_length()
        cfg = SamplerConfig(
            delta=float(params.get("delta", 0.05)),
            c1=float(params.get("c1", 1.0)),
            c2=float(params.get("c2", 1.0)),
            n_cuts_bits=counts_bits,
        )
        res = run_nr(
            h,
            oracle,
            cfg,
            rng,
            max_rounds=budget * max(1, int(params.get("max_rounds_factor", 100))),
            query_budget=budget,
            collect_trace=False,
        )
        return res.clustering, oracle.queries - start
    if name == "bf":
        votes = int(params.get("votes", 1))
        labeler = NodeLabeler(oracle, h, rng, votes=votes, budget=budget)
        res = run_bf(h, labeler, budget=budget)
        return res.clustering, oracle.queries - start
    if name == "erm":
        res = run_erm(h, oracle, budget, rng)
        return res.clustering, oracle.queries - start
    raise ValueError(f"unknown algorithm {name!r}")


# ---------------------------------------------------------------------------
# Tuning and the experiment driver
# ---------------------------------------------------------------------------


def tune(
    spec: ExperimentSpec,
    algorithm: str,
    h: Optional[Hierarchy] = None,
    inst: Optional[TrialInstance] = None,
) -> dict[str, Any]:
    """Pick the grid value with the lowest validation error (ties: smallest).

    The algorithm's ``grid`` maps one parameter name to candidate values;
    each candidate runs once to the tuning budget and is scored on the
    validation pairs, which never enter test evaluation.
    """
    params = dict(spec.algorithms[algorithm])
    grid_param = params.pop("grid_param", None)
    grid = params.pop("grid", None)
    if grid_param is None or grid is None:
        return params
    if not grid:
        raise EmptyGridError(f"empty grid for {algorithm}")
    if h is None:
        h = build_tree(spec.tree)
    if inst is None:
        inst = make_instance(h, spec, trial=0)
    budget = int(params.pop("tune_budget", spec.budgets[-1]))
    scored = []
    for value in grid:
        candidate = dict(params)
        candidate[grid_param] = value
        rng = random.Random(inst.seed ^ 0x7A57E)
        clustering, _ = run_algorithm(algorithm, candidate, inst, budget, rng)
        err = pair_disagreement(inst.oracle, clustering, h.n, inst.validation)
        scored.append((err, value))
    scored.sort(key=lambda ev: (ev[0], ev[1]))
    best_value = scored[0][1]
    chosen = dict(params)
    chosen[grid_param] = best_value
    return chosen


@dataclass
class TrialRow:
    algo: str
    seed: int
    budget: int
    queries_used: int
    test_error: float
    excess_risk: float
    k_out: int


def run_experiment(spec: ExperimentSpec, out_path: str, jobs: int = 1) -> list[TrialRow]:
    """Full protocol: tune once, then run every (algorithm, trial, budget)."""
    h = build_tree(spec.tree)
    tuned = {}
    tune_inst = make_instance(h, spec, trial=0)
    for algo in spec.algorithms:
        tuned[algo] = tune(spec, algo, h=h, inst=tune_inst)
    # Record whether persistent noise was materialized exactly or realized
    # by a hashed bernoulli approximation (auto mode resolves by size).
    from .oracles import NoisyOracle

    if isinstance(tune_inst.oracle, NoisyOracle):
        tuned["_resolved_noise_mode"] = tune_inst.oracle.mode

    tasks = []
    for trial in range(spec.trials):
        for algo in spec.algorithms:
            tasks.append((algo, trial))

    def run_trial(task: tuple[str, int]) -> list[TrialRow]:
        algo, trial = task
        inst = make_instance(h, spec, trial)
        rows = []
        for budget in spec.budgets:
            rng = random.Random(f"{inst.seed}:{algo}:{budget}")
            inst.oracle.reset_counter()
            clustering, used = run_algorithm(algo, tuned[algo], inst, budget, rng)
            err = pair_disagreement(inst.oracle, clustering, h.n, inst.test)
            best_err = pair_disagreement(
                inst.oracle, inst.best.clustering, h.n, inst.test
            )
            rows.append(
                TrialRow(
                    algo=algo,
                    seed=inst.seed,
                    budget=budget,
                    queries_used=used,
                    test_error=err,
                    excess_risk=err - best_err,
                    k_out=clustering.k,
                )
            )
        return rows

    all_rows: list[TrialRow] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for rows in pool.map(run_trial, tasks):
                all_rows.extend(rows)
    else:
        for task in tasks:
            all_rows.extend(run_trial(task))
    all_rows.sort(key=lambda r: (r.algo, r.seed, r.budget))

    write_results_csv(out_path, spec, tuned, all_rows)
    return all_rows


def write_results_csv(
    path: str,
    spec: ExperimentSpec,
    tuned: dict[str, dict[str, Any]],
    rows: list[TrialRow],
) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(
            "# config: "
            + json.dumps({"spec": spec.to_dict(), "tuned": tuned}, sort_keys=True)
            + "\n"
        )
        writer = csv.writer(fh)
        writer.writerow(
            ["algo", "seed", "budget", "queries_used", "test_error", "excess_risk", "k_out"]
        )
        for r in rows:
            writer.writerow(
                [
                    r.algo,
                    r.seed,
                    r.budget,
                    r.queries_used,
                    f"{r.test_error:.6f}",
                    f"{r.excess_risk:.6f}",
                    r.k_out,
                ]
            )
        # Aggregates: mean and population std per (algo, budget).
        groups: dict[tuple[str, int], list[TrialRow]] = {}
        for r in rows:
            groups.setdefault((r.algo, r.budget), []).append(r)
        for (algo, budget) in sorted(groups):
            errs = [r.test_error for r in groups[(algo, budget)]]
            mean = sum(errs) / len(errs)
            std = math.sqrt(sum((e - mean) ** 2 for e in errs) / len(errs))
            writer.writerow(
                [algo, "mean", budget, "", f"{mean:.6f}", "", ""]
            )
            writer.writerow([algo, "std", budget, "", f"{std:.6f}", "", ""])
