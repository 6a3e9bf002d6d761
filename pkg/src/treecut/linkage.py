"""Vector ingestion and agglomerative tree construction.

Single linkage runs in O(n^2) time and O(n) memory through a minimum
spanning tree; complete and median linkage update an O(n^2) distance
matrix with the usual coefficient rules.  Distances are kept squared
internally (the median/midpoint update is exact on squared Euclidean
distances; single/complete only compare, so squaring is harmless).
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    MemoryBudgetExceededError,
    ParseError,
    TooFewPointsError,
)
from .hierarchy import Hierarchy, build_hierarchy, leaf_depth_stats, count_cuts
from .priors import sibling_leaf_count

MATRIX_CAP_DEFAULT = 12_000

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class PointSet:
    x: np.ndarray  # (n, d) float
    labels: Optional[list[int]] = None
    payloads: Optional[list[str]] = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def load_vectors(
    path: str,
    format: str = "csv",
    label_column: Optional[int] = None,
    limit: Optional[int] = None,
) -> PointSet:
    """Read a point set from CSV (one row per point) or IDX image data."""
    if format == "csv":
        rows = []
        labels = [] if label_column is not None else None
        with open(path) as fh:
            for line_no, row in enumerate(csv.reader(fh)):
                if not row:
                    continue
                try:
                    vals = [float(v) for v in row]
                except ValueError as e:
                    raise ParseError(f"line {line_no + 1}: {e}") from None
                if label_column is not None:
                    labels.append(int(vals.pop(label_column)))
                rows.append(vals)
                if limit is not None and len(rows) >= limit:
                    break
        if not rows:
            raise ParseError("empty CSV")
        dim = len(rows[0])
        for k, r in enumerate(rows):
            if len(r) != dim:
                raise DimensionMismatchError(
                    f"row {k} has {len(r)} components, expected {dim}"
                )
        x = np.asarray(rows, dtype=np.float64)
        return PointSet(x=x, labels=labels, payloads=[str(i) for i in range(len(rows))])
    if format == "idx-image":
        with open(path, "rb") as fh:
            header = fh.read(16)
            if len(header) < 16:
                raise ParseError("truncated IDX header")
            magic, count, rows_, cols = struct.unpack(">IIII", header)
            if magic != IDX_IMAGE_MAGIC:
                raise ParseError(f"bad IDX magic 0x{magic:08x}")
            if limit is not None:
                count = min(count, limit)
            data = fh.read(count * rows_ * cols)
            if len(data) < count * rows_ * cols:
                raise ParseError("truncated IDX payload")
        x = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
        x = x.reshape(count, rows_ * cols)
        return PointSet(x=x, payloads=[str(i) for i in range(count)])
    raise ParseError(f"unknown format {format!r}")


def load_idx_labels(path: str, limit: Optional[int] = None) -> list[int]:
    with open(path, "rb") as fh:
        header = fh.read(8)
        magic, count = struct.unpack(">II", header)
        if magic != IDX_LABEL_MAGIC:
            raise ParseError(f"bad IDX label magic 0x{magic:08x}")
        if limit is not None:
            count = min(count, limit)
        data = fh.read(count)
    return list(data)


# ---------------------------------------------------------------------------
# Agglomeration
# ---------------------------------------------------------------------------


def _merge_tree(n: int, merges: list[tuple[int, int]], payloads) -> Hierarchy:
    """Parents from a merge sequence: cluster ids n, n+1, ... in merge order."""
    parents: list[Optional[int]] = [None] * (2 * n - 1)
    for k, (a, b) in enumerate(merges):
        parents[a] = n + k
        parents[b] = n + k
    return build_hierarchy(parents, payloads)


def _single_linkage_mst(x: np.ndarray) -> list[tuple[float, int, int]]:
    """Prim's algorithm on squared Euclidean distances; O(n^2), O(n) memory."""
    n = x.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    diff = x - x[0]
    best = np.einsum("ij,ij->i", diff, diff)
    best[0] = np.inf
    best_from[:] = 0
    edges = []
    for _ in range(n - 1):
        j = int(np.argmin(best))
        edges.append((float(best[j]), int(best_from[j]), j))
        in_tree[j] = True
        diff = x - x[j]
        d = np.einsum("ij,ij->i", diff, diff)
        closer = (d < best) & ~in_tree
        best_from[closer] = j
        best[closer] = d[closer]
        best[j] = np.inf
    return edges


def _agglomerate_single(points: PointSet) -> Hierarchy:
    n = points.n
    edges = _single_linkage_mst(points.x)
    edges.sort(key=lambda e: (e[0], min(e[1], e[2]), max(e[1], e[2])))
    # Union-find over current cluster ids; next merged cluster gets id n+k.
    cluster_of = list(range(n))
    parent_uf = list(range(n))

    def find(u: int) -> int:
        while parent_uf[u] != u:
            parent_uf[u] = parent_uf[parent_uf[u]]
            u = parent_uf[u]
        return u

    merges = []
    for _, u, v in edges:
        ru, rv = find(u), find(v)
        ca, cb = cluster_of[ru], cluster_of[rv]
        if ca > cb:
            ca, cb = cb, ca
        merges.append((ca, cb))
        parent_uf[ru] = rv
        cluster_of[find(rv)] = n + len(merges) - 1
    return _merge_tree(n, merges, points.payloads)


def _agglomerate_matrix(points: PointSet, linkage: str, cap: int) -> Hierarchy:
    n = points.n
    if n > cap:
        raise MemoryBudgetExceededError(
            f"{linkage} linkage needs an O(n^2) matrix; n={n} exceeds cap {cap}"
        )
    x = points.x
    sq = np.einsum("ij,ij->i", x, x)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, np.inf)
    d = np.maximum(d, 0.0, out=d, where=~np.isinf(d))
    d = d.astype(np.float32)
    np.fill_diagonal(d, np.inf)

    alive = np.ones(n, dtype=bool)
    cluster_id = np.arange(n, dtype=np.int64)  # matrix row -> current cluster id
    merges = []

    def row_nn(row: int) -> tuple[float, int]:
        """Nearest active neighbor of a row; ties by smallest id pair."""
        dist_row = d[row]
        masked = np.where(alive, dist_row, np.inf)
        masked[row] = np.inf
        m = float(masked.min())
        candidates = np.flatnonzero(masked == m)
        cid = cluster_id[row]
        best = min(
            candidates,
            key=lambda c: (
                min(cid, int(cluster_id[c])),
                max(cid, int(cluster_id[c])),
            ),
        )
        return m, int(best)

    nn_dist = np.empty(n, dtype=np.float64)
    nn_row = np.empty(n, dtype=np.int64)
    for i in range(n):
        nn_dist[i], nn_row[i] = row_nn(i)

    for step in range(n - 1):
        # Global minimum over cached row neighbors, smallest id pair on ties.
        act = np.flatnonzero(alive)
        m = float(nn_dist[act].min())
        best_key = None
        row = col = -1
        for r in act[np.flatnonzero(nn_dist[act] == m)]:
            c = int(nn_row[r])
            ca, cb = int(cluster_id[r]), int(cluster_id[c])
            key = (min(ca, cb), max(ca, cb))
            if best_key is None or key < best_key:
                best_key = key
                row, col = int(r), c
        ca, cb = int(cluster_id[row]), int(cluster_id[col])
        if ca > cb:
            ca, cb = cb, ca
        merges.append((ca, cb))

        # Merge col into row; update distances by the linkage rule.
        alive[col] = False
        idx = np.flatnonzero(alive)
        idx = idx[idx != row]
        if idx.size:
            if linkage == "complete":
                d[row, idx] = np.maximum(d[row, idx], d[col, idx])
            else:  # median (midpoint rule, exact on squared distances)
                d[row, idx] = (
                    0.5 * d[row, idx] + 0.5 * d[col, idx] - 0.25 * d[row, col]
                )
            d[idx, row] = d[row, idx]
        d[row, col] = d[col, row] = np.inf
        cluster_id[row] = n + step
        if alive.sum() < 2:
            break
        # Refresh caches: the merged row, rows that pointed at row/col, and
        # rows the (possibly shrunken) new distances now beat.
        nn_dist[row], nn_row[row] = row_nn(row)
        for k in idx:
            k = int(k)
            if nn_row[k] == col or nn_row[k] == row:
                nn_dist[k], nn_row[k] = row_nn(k)
            elif d[k, row] <= nn_dist[k]:
                nn_dist[k], nn_row[k] = row_nn(k)
    return _merge_tree(n, merges, points.payloads)


def agglomerate(
    points: PointSet, linkage: str = "single", matrix_cap: int = MATRIX_CAP_DEFAULT
) -> Hierarchy:
    """Build a strongly binary merge tree under the given linkage rule.

    Children order is (older cluster, newer cluster); equal-distance merges
    pick the smallest cluster-id pair, so output is deterministic in the
    input row order.
    """
    if points.n < 2:
        raise TooFewPointsError(f"need at least 2 points, got {points.n}")
    if linkage == "single":
        return _agglomerate_single(points)
    if linkage in ("complete", "median"):
        return _agglomerate_matrix(points, linkage, matrix_cap)
    raise ValueError(f"unknown linkage {linkage!r}")


def tree_report(h: Hierarchy) -> dict:
    """Summary statistics: depth profile, cut-count size, sibling pairs."""
    stats = leaf_depth_stats(h)
    counts = count_cuts(h)
    return {
        "n": stats.n,
        "height": stats.height,
        "avg_depth": stats.avg_depth,
        "std_depth": stats.std_depth,
        "n_cuts_bits": counts[h.root].bit_length(),
        "sibling_leaf_pairs": sibling_leaf_count(h),
    }
