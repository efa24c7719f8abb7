"""Distances between parameter vectors, K-Means, incoherence and DMAC tree building."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .topology import TreeTopology, weighted_mean


class Metric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"


def pairwise_distance(a: np.ndarray, b: np.ndarray, metric: Metric | str = Metric.EUCLIDEAN) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    metric = Metric(metric)
    if metric is Metric.EUCLIDEAN:
        diff = a - b
        return float(np.sqrt(np.dot(diff, diff)))
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0 if na == nb else 1.0
    if np.array_equal(a, b):
        return 0.0
    cos = float(np.dot(a, b)) / (na * nb)
    return max(0.0, 1.0 - min(cos, 1.0))


def distance_matrix(points: Sequence[np.ndarray], metric: Metric | str = Metric.EUCLIDEAN) -> np.ndarray:
    """Symmetric matrix of pairwise distances (each pair computed once)."""
    n = len(points)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = pairwise_distance(points[i], points[j], metric)
    return out


def _sq_dists(P: np.ndarray, C: np.ndarray) -> np.ndarray:
    # Expanded form keeps memory at O(n*k) for long parameter vectors.
    d2 = (P * P).sum(axis=1)[:, None] + (C * C).sum(axis=1)[None, :] - 2.0 * P @ C.T
    return np.maximum(d2, 0.0)


def kmeans(points: Sequence[np.ndarray], k: int, rng: np.random.Generator | int = 0,
           max_iter: int = 100) -> list[int]:
    """Lloyd's algorithm with k-means++ seeding; returns one label per point.

    Empty clusters are refilled with the point farthest from its centroid,
    so every label in ``range(k)`` is used.  Ties go to the lowest index.
    """
    P = np.asarray(points, dtype=np.float64)
    n = len(P)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng

    chosen = [int(rng.integers(n))]
    while len(chosen) < k:
        d2 = _sq_dists(P, P[chosen]).min(axis=1)
        d2[chosen] = 0.0
        if d2.sum() > 0:
            nxt = int(rng.choice(n, p=d2 / d2.sum()))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
    centroids = P[chosen].copy()

    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(P, centroids)
        new = np.argmin(d2, axis=1)
        for empty in range(k):
            if np.any(new == empty):
                continue
            counts = np.bincount(new, minlength=k)
            movable = np.flatnonzero(counts[new] > 1)
            far = movable[np.argmax(d2[movable, new[movable]])]
            new[far] = empty
            centroids[empty] = P[far]
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            centroids[j] = P[labels == j].mean(axis=0)
    return labels.tolist()


def incoherence(children_params: Sequence[np.ndarray], metric: Metric | str = Metric.EUCLIDEAN) -> float:
    """Mean distance of the members to their (unweighted) centroid."""
    if len(children_params) == 0:
        raise ValueError("incoherence of an empty group")
    if len(children_params) == 1:
        return 0.0
    P = np.asarray(children_params, dtype=np.float64)
    centroid = P.mean(axis=0)
    return float(np.mean([pairwise_distance(p, centroid, metric) for p in P]))


# -- DMAC --------------------------------------------------------------------

@dataclass(frozen=True)
class DmacConfig:
    gamma: float = 1.5
    metric: Metric = Metric.EUCLIDEAN

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise ValueError("gamma must be >= 1")
        object.__setattr__(self, "metric", Metric(self.metric))


def merge_band(tau: float, gamma: float) -> float:
    return math.inf if math.isinf(gamma) else tau * gamma


def _components(n: int, linked: np.ndarray) -> list[list[int]]:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(linked, 1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def dmac_build(leaves: Sequence[tuple[int, np.ndarray, int]], config: DmacConfig = DmacConfig(),
               trace: list | None = None) -> TreeTopology:
    """Multi-branch agglomerative clustering of ``(node_id, params, weight)`` leaves.

    Each iteration takes the smallest distance ``tau`` among the current
    top-level nodes and merges every connected component of the graph whose
    edges are pairs with distance <= ``tau * gamma``.  Merged parents carry
    the data-weighted mean of their members.  If ``trace`` is given, one list
    of merged groups (each a sorted list of leaf ids covered) is appended per
    iteration.
    """
    if not leaves:
        raise ValueError("dmac_build needs at least one leaf")
    tree = TreeTopology()
    top = []
    for node_id, params, weight in leaves:
        top.append(tree.add_client(np.asarray(params, dtype=np.float64), int(weight), node_id=node_id))
    top.sort()

    while len(top) > 1:
        params = [tree.nodes[t].params for t in top]
        dist = distance_matrix(params, config.metric)
        upper = dist[np.triu_indices(len(top), 1)]
        band = merge_band(float(upper.min()), config.gamma)
        merged_groups = []
        next_top = []
        for comp in _components(len(top), dist <= band):
            members = [top[i] for i in comp]
            if len(members) == 1:
                next_top.append(members[0])
                continue
            agg = weighted_mean([tree.nodes[m].params for m in members],
                                [tree.nodes[m].data_weight for m in members])
            next_top.append(tree.add_cluster(members, agg))
            merged_groups.append(sorted(c for m in members for c in tree.leaves_under(m)))
        if trace is not None:
            trace.append(merged_groups)
        top = sorted(next_top)
    tree.root = top[0]
    return tree
