import csv
import random

from treecut import nr, ots, wdp
from treecut.harness import generate_tree, uniform_cluster_cut
from treecut.hierarchy import count_cuts
from treecut.nr import SamplerConfig, run_nr
from treecut.oracles import PlantedOracle
from treecut.priors import uniform_prior

from helpers import planted_node_labeler


def test_ots_trace_csv(tmp_path):
    h = generate_tree("full", 16)
    cut = uniform_cluster_cut(h, 4)
    res = ots.run_ots(h, planted_node_labeler(h, cut))
    path = tmp_path / "trace.csv"
    ots.write_trace_csv(res.records, str(path))
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["step", "queried_node", "answer", "vs_bits_before", "vs_bits_after"]
    assert len(rows) == res.queries + 1
    # Bit lengths shrink to 1 (version space of size 1) by the end.
    assert rows[-1][4] == "1"


def test_wdp_trace_csv(tmp_path):
    h = generate_tree("full", 16)
    cut = uniform_cluster_cut(h, 4)
    res = wdp.run_wdp(h, uniform_prior(h, count_cuts(h)), planted_node_labeler(h, cut))
    path = tmp_path / "trace.csv"
    wdp.write_trace_csv(res.searches, str(path))
    rows = list(csv.reader(open(path)))
    assert rows[0] == [
        "search_idx",
        "path_leaf",
        "path_len",
        "entropy",
        "normalized_entropy",
        "queries",
        "cut_node",
    ]
    assert len(rows) == len(res.searches) + 1
    # On selected paths the mass sums to 1, so both entropies coincide.
    for row in rows[1:]:
        assert abs(float(row[3]) - float(row[4])) < 1e-6


def test_nr_trace_csv(tmp_path):
    h = generate_tree("full", 16)
    cut = uniform_cluster_cut(h, 4)
    oracle = PlantedOracle(h, cut)
    cfg = SamplerConfig(delta=0.05, n_cuts_bits=count_cuts(h)[h.root].bit_length())
    res = run_nr(h, oracle, cfg, random.Random(0), max_rounds=50)
    path = tmp_path / "trace.csv"
    nr.write_trace_csv(res.trace, str(path))
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "pair_i", "pair_j", "d_t", "p_t", "queried", "cum_queries", "cost"]
    assert len(rows) == 51
    assert int(rows[-1][6]) == res.queries
