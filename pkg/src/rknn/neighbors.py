"""k-nearest-neighbor adjacency graphs with exact (distance, index) ordering.

For a point ``x_i`` the candidates are all other entries of the configuration
(entry ``i`` itself is removed; a duplicate at another index stays and sits at
distance 0). Candidates are ordered by distance and then by index, so among
equidistant points the one with the smaller index wins. Energies at tie
configurations depend on this rule, so the tree search reproduces it exactly:
the tree only proposes candidates, distances are recomputed with the domain
metric, and the final order comes from a stable lexicographic sort.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Domain

# extra candidates fetched per query so that most rows need no fallback
_SLACK = 4

DEFAULT_WORKERS = 1


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """Directed graph of the k nearest neighbors of every entry.

    ``neighbor_index[i]`` lists the neighbors of entry ``i`` in order, and
    ``neighbor_dist[i]`` the matching distances (nondecreasing). Rows have
    ``min(k, N - 1)`` entries. ``next_dist[i]`` and ``next_index[i]`` describe
    the (k+1)-st neighbor (``inf`` and -1 when there is none).
    """

    k: int
    neighbor_index: np.ndarray
    neighbor_dist: np.ndarray
    next_dist: np.ndarray
    next_index: np.ndarray

    @property
    def n(self) -> int:
        return self.neighbor_index.shape[0]

    @property
    def k_eff(self) -> int:
        return self.neighbor_index.shape[1]

    def edges(self):
        """Flat (source, target) index arrays in row-major order."""
        src = np.repeat(np.arange(self.n), self.k_eff)
        return src, self.neighbor_index.ravel()

    def tie_rows(self) -> np.ndarray:
        """Rows whose k-th and (k+1)-st neighbors are equidistant.

        At such rows the neighbor set is decided by the index rule and the
        energy is not differentiable.
        """
        if self.k_eff == 0:
            return np.zeros(self.n, dtype=bool)
        return self.neighbor_dist[:, -1] == self.next_dist

    @property
    def has_ties(self) -> bool:
        return bool(np.any(self.tie_rows()))


def _select(idx, dist, rows, m):
    """Lexicographic (distance, index) selection of the first m columns."""
    order = np.lexsort((idx, dist), axis=-1)
    idx = np.take_along_axis(idx, order, axis=-1)[:, :m]
    dist = np.take_along_axis(dist, order, axis=-1)[:, :m]
    return idx, dist


def _finish(k, idx, dist, n):
    keff = min(k, n - 1)
    if idx.shape[1] > keff:
        next_dist = dist[:, keff].copy()
        next_index = idx[:, keff].astype(np.intp)
    else:
        next_dist = np.full(n, np.inf)
        next_index = np.full(n, -1, dtype=np.intp)
    return NeighborGraph(
        k=k,
        neighbor_index=np.ascontiguousarray(idx[:, :keff], dtype=np.intp),
        neighbor_dist=np.ascontiguousarray(dist[:, :keff]),
        next_dist=next_dist,
        next_index=next_index,
    )


def knn_brute(config, domain: Domain, k: int) -> NeighborGraph:
    """O(N^2) reference: full distance matrix and a stable sort per row."""
    if k < 1:
        raise ValueError("k must be at least 1")
    x = np.asarray(config, dtype=float)
    n = x.shape[0]
    if n < 1:
        raise ValueError("configuration is empty")
    m = min(k + 1, n - 1)
    if m == 0:
        return _finish(k, np.zeros((n, 0), dtype=np.intp), np.zeros((n, 0)), n)
    dist = domain.dist(x[:, None, :], x[None, :, :])
    idx = np.broadcast_to(np.arange(n), (n, n)).copy()
    # drop the diagonal: entry i is never its own neighbor
    keep = ~np.eye(n, dtype=bool)
    dist = dist[keep].reshape(n, n - 1)
    idx = idx[keep].reshape(n, n - 1)
    idx, dist = _select(idx, dist, None, m)
    return _finish(k, idx, dist, n)


def build_graph(config, domain: Domain, k: int, workers: int | None = None) -> NeighborGraph:
    """k-nearest-neighbor graph via a k-d tree, identical to :func:`knn_brute`.

    The tree is queried for a few more neighbors than needed. A row is trusted
    when the farthest proposed candidate lies strictly beyond the last selected
    distance; otherwise every point within that distance is fetched with a ball
    query and sorted again.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    x = np.asarray(config, dtype=float)
    n = x.shape[0]
    if n < 1:
        raise ValueError("configuration is empty")
    m = min(k + 1, n - 1)
    if m == 0:
        return _finish(k, np.zeros((n, 0), dtype=np.intp), np.zeros((n, 0)), n)
    if workers is None:
        workers = DEFAULT_WORKERS

    data, boxsize = domain.tree_data(x)
    tree = cKDTree(data, boxsize=boxsize)
    q = min(m + 1 + _SLACK, n)
    tree_dist, cand = tree.query(data, k=q, workers=workers)
    tree_dist = np.asarray(tree_dist).reshape(n, q)
    cand = np.asarray(cand).reshape(n, q)

    rows = np.arange(n)
    exact = domain.dist(x[:, None, :], x[cand])
    is_self = cand == rows[:, None]
    exact = np.where(is_self, np.inf, exact)
    key_idx = np.where(is_self, n, cand)
    idx, dist = _select(key_idx, exact, None, m)

    if q == n:
        # the tree returned every entry; nothing can be missing
        return _finish(k, idx, dist, n)

    last = dist[:, -1]
    margin = 1e-9 * np.maximum(last, 1e-300) + 1e-300
    suspect = ~(tree_dist[:, -1] > last + margin)
    for i in np.flatnonzero(suspect):
        radius = last[i] + margin[i] + 1e-12 * max(1.0, last[i])
        ball = np.asarray(tree.query_ball_point(data[i], radius), dtype=np.intp)
        ball = ball[ball != i]
        d_i = domain.dist(x[i], x[ball])
        order = np.lexsort((ball, d_i))[:m]
        idx[i] = ball[order]
        dist[i] = d_i[order]
    return _finish(k, idx, dist, n)


def in_degrees(graph: NeighborGraph) -> np.ndarray:
    """Number of rows listing each index as a neighbor."""
    return np.bincount(graph.neighbor_index.ravel(), minlength=graph.n)
