import json

import pytest

from treecut.errors import NotBinaryError, ParseError
from treecut.treeio import (
    cut_from_json,
    cut_to_json,
    load_tree,
    save_tree,
    tree_from_dict,
)

from helpers import CUT_3CLUSTERS, tree_22cuts


def test_roundtrip(tmp_path):
    h = tree_22cuts()
    path = tmp_path / "tree.json"
    save_tree(h, str(path))
    again = load_tree(str(path))
    assert again.parent == h.parent
    assert again.left == h.left
    assert again.payloads == h.payloads


def test_loader_normalizes_arbitrary_ids():
    # Same 2-leaf tree with scrambled ids: root 7 over leaves 42 and 13.
    data = {
        "n": 2,
        "nodes": [
            {"id": 7, "left": 42, "right": 13},
            {"id": 42, "left": None, "right": None},
            {"id": 13, "left": None, "right": None},
        ],
        "payloads": ["a", "b"],
    }
    h = tree_from_dict(data)
    assert h.n == 2
    assert h.root == 2
    assert h.leaves_under(2) == [0, 1]
    assert h.payloads == ["a", "b"]


def test_loader_rejects_single_child():
    data = {
        "n": 1,
        "nodes": [
            {"id": 0, "left": 1, "right": None},
            {"id": 1, "left": None, "right": None},
        ],
    }
    with pytest.raises(NotBinaryError):
        tree_from_dict(data)


def test_loader_rejects_duplicate_parent():
    data = {
        "n": 2,
        "nodes": [
            {"id": 0, "left": 2, "right": 2},
            {"id": 2, "left": None, "right": None},
            {"id": 3, "left": None, "right": None},
        ],
    }
    with pytest.raises(ParseError):
        tree_from_dict(data)


def test_loader_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_tree(str(path))


def test_cut_serialization():
    data = cut_to_json(CUT_3CLUSTERS)
    assert data == [5, 11, 12]
    assert cut_from_json(data) == CUT_3CLUSTERS


def test_loader_preserves_child_order():
    # right child deliberately carries the smaller renumbered id; the
    # format's left/right designation must survive normalization.
    data = {
        "n": 3,
        "nodes": [
            {"id": 10, "left": 20, "right": 30, },
            {"id": 20, "left": 31, "right": 32},
            {"id": 30, "left": None, "right": None},
            {"id": 31, "left": None, "right": None},
            {"id": 32, "left": None, "right": None},
        ],
    }
    h = tree_from_dict(data)
    # Appearance order: leaves 30->0, 31->1, 32->2; internals 10->3, 20->4.
    assert h.left[3] == 4 and h.right[3] == 0
    assert h.left[4] == 1 and h.right[4] == 2
    assert h.leaf_order == [1, 2, 0]


def test_roundtrip_preserves_arbitrary_child_order(tmp_path):
    data = {
        "n": 2,
        "nodes": [
            {"id": 0, "left": None, "right": None},
            {"id": 1, "left": None, "right": None},
            {"id": 2, "left": 1, "right": 0},
        ],
    }
    h = tree_from_dict(data)
    assert (h.left[2], h.right[2]) == (1, 0)
    path = tmp_path / "t.json"
    save_tree(h, str(path))
    again = load_tree(str(path))
    assert (again.left[2], again.right[2]) == (1, 0)
