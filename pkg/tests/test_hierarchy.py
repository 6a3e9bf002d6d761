import random

import pytest

from treecut.errors import (
    CyclicError,
    InvalidCutError,
    LeafNodeError,
    MultipleRootsError,
    NotBinaryError,
)
from treecut.hierarchy import (
    Cut,
    build_hierarchy,
    count_cuts,
    cut_to_clustering,
    clustering_to_cut,
    lca_naive,
    leaf_depth_stats,
    preprocess_lca,
    sample_node_query,
)
from treecut.harness import generate_tree

from helpers import enumerate_cuts, tree_22cuts, CUT_3CLUSTERS, three_cherry_tree, random_tree


def test_two_leaf_tree():
    h = build_hierarchy([2, 2, None])
    assert h.n == 2
    assert h.height == 1
    assert h.root == 2
    assert count_cuts(h)[h.root] == 2


def test_tree_22cuts_valid():
    h = tree_22cuts()
    assert h.n == 8
    assert h.n_nodes == 15


def test_single_child_rejected():
    # node 2 is the root, node 1 its only child, node 0 child of 1
    with pytest.raises(NotBinaryError):
        build_hierarchy([1, 2, None])


def test_multiple_roots_rejected():
    with pytest.raises(MultipleRootsError):
        build_hierarchy([None, None, None])


def test_cycle_rejected():
    # 4 nodes: 3 is root over leaf 0; 1 and 2 point at each other
    with pytest.raises((CyclicError, NotBinaryError)):
        build_hierarchy([3, 2, 1, None])


def test_count_cuts_example_tree():
    h = tree_22cuts()
    assert count_cuts(h)[h.root] == 22


def test_count_cuts_line_tree():
    for n in (2, 5, 9, 33):
        h = generate_tree("line", n)
        assert count_cuts(h)[h.root] == n


def test_count_cuts_full_tree_n8():
    h = generate_tree("full", 8)
    assert count_cuts(h)[h.root] == 26


def test_count_matches_enumeration_random_trees():
    rng = random.Random(11)
    for trial in range(200):
        n = rng.randint(2, 12)
        h = random_tree(n, seed=trial)
        cuts = enumerate_cuts(h)
        assert len(cuts) == count_cuts(h)[h.root]
        assert len(set(cuts)) == len(cuts)


def test_cut_to_clustering_roundtrip():
    h = tree_22cuts()
    cl = cut_to_clustering(h, CUT_3CLUSTERS)
    assert cl.to_lists() == [[0, 1, 2, 3, 4], [5], [6, 7]]
    assert clustering_to_cut(h, cl) == CUT_3CLUSTERS


def test_cut_root_and_leaves():
    h = tree_22cuts()
    assert cut_to_clustering(h, Cut([h.root])).k == 1
    assert cut_to_clustering(h, Cut(range(h.n))).k == h.n


def test_invalid_cuts_rejected():
    h = tree_22cuts()
    with pytest.raises(InvalidCutError):
        cut_to_clustering(h, Cut([11]))  # gap
    with pytest.raises(InvalidCutError):
        cut_to_clustering(h, Cut([h.root, 5]))  # overlap


def test_cut_clustering_bijection():
    rng = random.Random(3)
    for trial in range(30):
        n = rng.randint(2, 10)
        h = random_tree(n, seed=100 + trial)
        seen = set()
        for members in enumerate_cuts(h):
            cl = cut_to_clustering(h, Cut(members))
            key = frozenset(cl.clusters)
            assert key not in seen
            seen.add(key)
            assert clustering_to_cut(h, cl) == Cut(members)


def test_lca_identity_and_siblings():
    h = tree_22cuts()
    idx = preprocess_lca(h)
    assert idx.lca(3, 3) == 3
    assert idx.lca(0, 1) == 8
    assert idx.lca(6, 7) == 12


def test_lca_cherry_tree():
    h = three_cherry_tree()
    idx = preprocess_lca(h)
    # lca of the first and fourth leaf is the node covering leaves 0..3
    assert idx.lca(0, 3) == 9


def test_lca_matches_naive_walk():
    rng = random.Random(5)
    for trial in range(12):
        n = rng.randint(2, 256)
        h = random_tree(n, seed=500 + trial)
        idx = preprocess_lca(h)
        for _ in range(300):
            a = rng.randrange(h.n_nodes)
            b = rng.randrange(h.n_nodes)
            assert idx.lca(a, b) == lca_naive(h, a, b)


def test_lca_extreme_leaves():
    h = tree_22cuts()
    idx = preprocess_lca(h)
    for node in range(h.n_nodes):
        leaves = h.leaves_under(node)
        assert idx.leftmost_leaf(node) == leaves[0]
        assert idx.rightmost_leaf(node) == leaves[-1]
    assert set(h.leaves_under(11)) == {0, 1, 2, 3, 4}


def test_sample_node_query_two_leaf():
    h = build_hierarchy([2, 2, None])
    rng = random.Random(0)
    assert sorted(sample_node_query(h, 2, rng)) == [0, 1]


def test_sample_node_query_rejects_leaf():
    h = tree_22cuts()
    with pytest.raises(LeafNodeError):
        sample_node_query(h, 0, random.Random(0))


def test_sample_node_query_cherry_support():
    h = three_cherry_tree()
    rng = random.Random(1)
    seen = set()
    for _ in range(200):
        seen.add(sample_node_query(h, 9, rng))
    assert seen == {(a, b) for a in (0, 1) for b in (2, 3)}


def test_sample_node_query_uniform():
    from scipy import stats

    h = three_cherry_tree()
    rng = random.Random(7)
    counts = {}
    draws = 10_000
    for _ in range(draws):
        pair = sample_node_query(h, 9, rng)
        counts[pair] = counts.get(pair, 0) + 1
    observed = [counts.get((a, b), 0) for a in (0, 1) for b in (2, 3)]
    chi2 = sum((o - draws / 4) ** 2 / (draws / 4) for o in observed)
    assert chi2 < stats.chi2.ppf(0.999, df=3)


def test_leaf_depth_stats_perfect_tree():
    h = generate_tree("full", 8)
    s = leaf_depth_stats(h)
    assert s.avg_depth == 3.0
    assert s.std_depth == 0.0
    assert s.height == 3


def test_leaf_depth_stats_line_tree():
    h = generate_tree("line", 4)
    s = leaf_depth_stats(h)
    assert sorted(h.depth[i] for i in range(4)) == [1, 2, 3, 3]
    assert s.avg_depth == pytest.approx(2.25)


def test_count_matches_enumeration_larger_trees():
    # Push the brute-force cross-check toward the 1e5-cut scale.
    rng = random.Random(77)
    checked = 0
    seed = 0
    while checked < 5:
        seed += 1
        n = rng.randint(14, 24)
        h = random_tree(n, seed=9000 + seed)
        total = count_cuts(h)[h.root]
        if total > 100_000:
            continue
        assert len(enumerate_cuts(h)) == total
        checked += 1
