"""JSON persistence for trees, cuts, clusterings and priors.

Tree files look like::

    {"n": 4, "nodes": [{"id": 0, "left": null, "right": null}, ...],
     "payloads": ["a", "b", "c", "d"]}

Ids in a file may be arbitrary integers; the loader renumbers them so that
leaves occupy 0..n-1 in order of appearance and internal nodes follow, also
in order of appearance.  Saved files always use the normalized convention,
so load(save(h)) is the identity.
"""
from __future__ import annotations

import json
from typing import Any, Optional

from .errors import NotBinaryError, ParseError
from .hierarchy import Clustering, Cut, Hierarchy, build_hierarchy


def tree_to_dict(h: Hierarchy) -> dict[str, Any]:
    nodes = []
    for i in range(h.n_nodes):
        nodes.append(
            {
                "id": i,
                "left": None if h.left[i] < 0 else h.left[i],
                "right": None if h.right[i] < 0 else h.right[i],
            }
        )
    return {"n": h.n, "nodes": nodes, "payloads": list(h.payloads)}


def tree_from_dict(data: dict[str, Any]) -> Hierarchy:
    try:
        raw_nodes = data["nodes"]
        n = int(data["n"])
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed tree file: {e}") from None

    ids = [int(nd["id"]) for nd in raw_nodes]
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate node ids")
    by_id = {int(nd["id"]): nd for nd in raw_nodes}

    # Renumber: leaves first (order of appearance), then internal nodes.
    leaves = [i for i in ids if by_id[i].get("left") is None]
    internals = [i for i in ids if by_id[i].get("left") is not None]
    if len(leaves) != n:
        raise ParseError(f"file declares n={n} but has {len(leaves)} leaves")
    remap = {old: new for new, old in enumerate(leaves)}
    remap.update({old: n + k for k, old in enumerate(internals)})

    parents: list[Optional[int]] = [None] * len(ids)
    child_order: list[Optional[tuple[int, int]]] = [None] * len(ids)
    for old in internals:
        nd = by_id[old]
        left, right = nd.get("left"), nd.get("right")
        if left is None or right is None:
            raise NotBinaryError(f"node {old} has exactly one child")
        for child in (int(left), int(right)):
            if child not in remap:
                raise ParseError(f"node {old} references unknown child {child}")
            if parents[remap[child]] is not None:
                raise ParseError(f"node {child} has two parents")
            parents[remap[child]] = remap[old]
        # Left/right order is part of the format, not an id artifact.
        child_order[remap[old]] = (remap[int(left)], remap[int(right)])

    payloads = data.get("payloads")
    if payloads is not None:
        payloads = [str(p) for p in payloads]
    return build_hierarchy(parents, payloads, child_order=child_order)


def save_tree(h: Hierarchy, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(tree_to_dict(h), fh)


def load_tree(path: str) -> Hierarchy:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(str(e)) from None
    return tree_from_dict(data)


def cut_to_json(cut: Cut) -> list[int]:
    return cut.sorted_ids()


def cut_from_json(data: list[int]) -> Cut:
    return Cut(data)


def clustering_to_json(clustering: Clustering) -> list[list[int]]:
    return clustering.to_lists()


def clustering_from_json(data: list[list[int]]) -> Clustering:
    return Clustering(data)
