import struct

import numpy as np
import pytest

from treecut.errors import (
    MemoryBudgetExceededError,
    ParseError,
    TooFewPointsError,
)
from treecut.linkage import PointSet, agglomerate, load_vectors, tree_report
from treecut.hierarchy import cut_to_clustering, Cut


def test_load_csv(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("0.0,1.0\n2.0,3.0\n4.0,5.0\n")
    ps = load_vectors(str(path))
    assert ps.n == 3 and ps.dim == 2


def test_load_csv_with_labels(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("0.0,1.0,7\n2.0,3.0,8\n")
    ps = load_vectors(str(path), label_column=2)
    assert ps.labels == [7, 8]
    assert ps.dim == 2


def test_load_csv_dimension_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\n3.0\n")
    from treecut.errors import DimensionMismatchError

    with pytest.raises(DimensionMismatchError):
        load_vectors(str(path))


def test_idx_bad_magic(tmp_path):
    path = tmp_path / "bad.idx"
    path.write_bytes(struct.pack(">IIII", 0x00000999, 1, 2, 2) + bytes(4))
    with pytest.raises(ParseError):
        load_vectors(str(path), format="idx-image")


def test_idx_roundtrip(tmp_path):
    path = tmp_path / "img.idx"
    pixels = bytes(range(8))
    path.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + pixels)
    ps = load_vectors(str(path), format="idx-image")
    assert ps.n == 2 and ps.dim == 4
    assert ps.x[1].tolist() == [4.0, 5.0, 6.0, 7.0]
    limited = load_vectors(str(path), format="idx-image", limit=1)
    assert limited.n == 1


def test_two_points_any_linkage():
    ps = PointSet(x=np.array([[0.0], [3.0]]))
    for linkage in ("single", "complete", "median"):
        h = agglomerate(ps, linkage)
        assert h.n == 2
        assert h.height == 1


def test_too_few_points():
    with pytest.raises(TooFewPointsError):
        agglomerate(PointSet(x=np.array([[1.0]])), "single")


def test_matrix_cap():
    ps = PointSet(x=np.zeros((5, 1)))
    with pytest.raises(MemoryBudgetExceededError):
        agglomerate(ps, "complete", matrix_cap=4)


def test_single_linkage_collinear_merge_order():
    # Points at 0, 1, 3: nearest pair (0,1) merges first, then 3 joins.
    ps = PointSet(x=np.array([[0.0], [1.0], [3.0]]))
    h = agglomerate(ps, "single")
    # First merge is node 3 over leaves 0,1; root joins leaf 2.
    assert sorted((h.left[3], h.right[3])) == [0, 1]
    assert h.root == 4


def test_complete_linkage_two_far_pairs():
    ps = PointSet(x=np.array([[0.0], [1.0], [100.0], [101.0]]))
    h = agglomerate(ps, "complete")
    top = cut_to_clustering(h, Cut([h.left[h.root], h.right[h.root]]))
    assert top.to_lists() == [[0, 1], [2, 3]]


def test_all_linkages_valid_and_deterministic():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 3))
    for linkage in ("single", "complete", "median"):
        h1 = agglomerate(PointSet(x=x.copy()), linkage)
        h2 = agglomerate(PointSet(x=x.copy()), linkage)
        assert h1.parent == h2.parent
        assert h1.n == 40
        assert h1.n_nodes == 79


def test_single_linkage_matches_scipy():
    from scipy.cluster.hierarchy import linkage as scipy_linkage
    from scipy.spatial.distance import pdist

    rng = np.random.default_rng(1)
    x = rng.normal(size=(30, 4))
    h = agglomerate(PointSet(x=x.copy()), "single")
    # Compare the induced flat clusterings at every merge count.
    z = scipy_linkage(pdist(x), method="single")
    from scipy.cluster.hierarchy import fcluster

    # Cross-check the same top-level split.
    ours = cut_to_clustering(h, Cut([h.left[h.root], h.right[h.root]]))
    theirs = fcluster(z, t=2, criterion="maxclust")
    groups = {}
    for leaf, g in enumerate(theirs):
        groups.setdefault(g, set()).add(leaf)
    assert {frozenset(c) for c in ours.clusters} == {
        frozenset(g) for g in groups.values()
    }


def test_single_linkage_merge_distances_nondecreasing():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 2))
    from treecut.linkage import _single_linkage_mst

    edges = _single_linkage_mst(x)
    dists = sorted(e[0] for e in edges)
    assert dists == [e[0] for e in sorted(edges, key=lambda e: e[0])]


def test_tree_report_fields():
    ps = PointSet(x=np.arange(8.0).reshape(8, 1))
    h = agglomerate(ps, "single")
    report = tree_report(h)
    assert report["n"] == 8
    assert set(report) == {
        "n",
        "height",
        "avg_depth",
        "std_depth",
        "n_cuts_bits",
        "sibling_leaf_pairs",
    }


def test_median_linkage_midpoint_semantics():
    # Three points on a line: clusters {0,1} then the midpoint 0.5 drives
    # the last distance: d(2, mid) = 3.5 in true distance.
    ps = PointSet(x=np.array([[0.0], [1.0], [4.0]]))
    h = agglomerate(ps, "median")
    assert sorted((h.left[3], h.right[3])) == [0, 1]
