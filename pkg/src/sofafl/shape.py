"""Topology evolution: grafting, pruning, sibling consolidation and purification.

Each operation edits the tree in place, refreshes the aggregated parameters
of every ancestor it touched, and appends a record to an optional edit log.
``shape_round`` runs the four of them in the configured order.
"""

from __future__ import annotations

import itertools
import statistics
from dataclasses import dataclass

import numpy as np

from .clustering import Metric, incoherence, kmeans, pairwise_distance
from .rng import stream
from .topology import TopologyError, TreeTopology, weighted_mean

OPS = ("graft", "prune", "merge", "split")


@dataclass
class ShapeConfig:
    epsilon: float = 0.05
    tau_merge: float | None = None
    theta_split: float | None = None
    op_order: tuple[str, ...] = ("graft", "merge", "split", "prune")
    metric: Metric = Metric.EUCLIDEAN

    def __post_init__(self):
        self.op_order = tuple(self.op_order)
        self.metric = Metric(self.metric)
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.tau_merge is not None and not self.tau_merge > 0:
            raise ValueError("tau_merge must be > 0")
        if self.theta_split is not None and not self.theta_split >= 0:
            raise ValueError("theta_split must be >= 0")
        if sorted(self.op_order) != sorted(OPS):
            raise ValueError(f"op_order must be a permutation of {OPS}")

    def require_thresholds(self) -> tuple[float, float]:
        if self.tau_merge is None or self.theta_split is None:
            raise ValueError("tau_merge/theta_split unset; call calibrate_thresholds first")
        return self.tau_merge, self.theta_split


def sibling_distances(tree: TreeTopology, metric: Metric | str = Metric.EUCLIDEAN) -> list[float]:
    out = []
    for nid in tree.clusters():
        kids = tree[nid].children
        for a, b in itertools.combinations(kids, 2):
            out.append(pairwise_distance(tree[a].params, tree[b].params, metric))
    return out


def calibrate_thresholds(tree: TreeTopology, config: ShapeConfig) -> ShapeConfig:
    """Fill unset thresholds: tau = half the median sibling distance, theta = 2 tau."""
    dists = sibling_distances(tree, config.metric)
    median = statistics.median(dists) if dists else 0.0
    tau = config.tau_merge if config.tau_merge is not None else max(0.5 * median, 1e-12)
    theta = config.theta_split if config.theta_split is not None else 2.0 * tau
    return ShapeConfig(config.epsilon, tau, theta, config.op_order, config.metric)


def _dist(tree, a, b, metric):
    return pairwise_distance(tree[a].params, tree[b].params, metric)


def _drop_empty(tree: TreeTopology, node_id: int | None) -> int | None:
    """Remove clusters left without children, walking upward; return the first survivor."""
    while node_id is not None and not tree[node_id].is_client and not tree[node_id].children:
        parent = tree[node_id].parent
        tree.remove_internal(node_id)
        node_id = parent
    return node_id


def graft(tree: TreeTopology, child: int, config: ShapeConfig, log: list | None = None) -> bool:
    """Move ``child`` to a same-depth cluster that is clearly closer than its parent."""
    parent = tree[child].parent
    if parent is None:
        return False
    level = tree.depth(parent)
    inside = set(tree.subtree(child))
    candidates = [c for c in tree.clusters()
                  if c != parent and c not in inside and tree.depth(c) == level]
    if not candidates:
        return False
    d_pre = _dist(tree, parent, child, config.metric)
    best, d_min = None, np.inf
    for c in candidates:
        d = _dist(tree, c, child, config.metric)
        if d < d_min:
            best, d_min = c, d
    if not d_min * (1.0 + config.epsilon) < d_pre:
        return False
    tree.reparent(child, best)
    survivor = _drop_empty(tree, parent)
    tree.refresh_params([n for n in (survivor, best) if n is not None])
    if log is not None:
        log.append({"op": "graft", "nodes": [child, parent, best],
                    "distances": {"d_pre": d_pre, "d_min": d_min},
                    "leaves": tree.leaves_under(child)})
    return True


def prune(tree: TreeTopology, node: int, log: list | None = None) -> bool:
    """Splice out a cluster with a single child (or drop an empty one)."""
    n = tree[node]
    if n.is_client or len(n.children) > 1:
        return False
    parent = n.parent
    if not n.children:
        survivor = _drop_empty(tree, node)
        if survivor is not None:
            tree.refresh_params([survivor])
        if log is not None:
            log.append({"op": "prune", "nodes": [node], "distances": {}})
        return True
    (only,) = n.children
    if parent is None:
        tree.detach(only)
        tree.remove_internal(node)
        tree.root = only
    else:
        tree.reparent(only, parent)
        tree.remove_internal(node)
        tree.refresh_params([parent])
    if log is not None:
        log.append({"op": "prune", "nodes": [node, only] + ([parent] if parent is not None else []),
                    "distances": {}})
    return True


def _regroup(tree: TreeTopology, members: list[int], parent: int) -> int:
    """Create a cluster over ``members`` (currently anywhere) and hang it under ``parent``."""
    params = weighted_mean([tree[m].params for m in members], [tree[m].data_weight for m in members])
    for m in members:
        tree.detach(m)
    new = tree.add_cluster(members, params)
    tree.reparent(new, parent)
    return new


def merge_siblings(tree: TreeTopology, a: int, b: int, config: ShapeConfig,
                   log: list | None = None) -> int | None:
    """Fuse two sibling clusters closer than ``tau_merge`` into one node."""
    tau, _ = config.require_thresholds()
    na, nb = tree[a], tree[b]
    if a == b or na.parent is None or na.parent != nb.parent:
        raise TopologyError(f"nodes {a} and {b} are not siblings")
    if na.is_client or nb.is_client:
        raise TopologyError("only cluster siblings can be merged")
    d = _dist(tree, a, b, config.metric)
    if not d < tau:
        return None
    parent = na.parent
    members = list(na.children) + list(nb.children)
    params = weighted_mean([na.params, nb.params], [na.data_weight, nb.data_weight])
    for m in members:
        tree.detach(m)
    new = tree.add_cluster(members, params)
    tree.remove_internal(a)
    tree.remove_internal(b)
    tree.reparent(new, parent)
    tree.refresh_params([parent])
    if log is not None:
        log.append({"op": "merge", "nodes": [a, b, new], "distances": {"d": d}})
    return new


def split(tree: TreeTopology, node: int, config: ShapeConfig, seed: int,
          log: list | None = None) -> bool:
    """Replace ``node`` by K-Means subgroups of its children if all are coherent enough.

    Tries k = 2, 3, ... and keeps the first k whose groups all have
    incoherence <= ``theta_split``.  A partition into singletons only would
    dissolve the node without purifying anything, so it never counts.
    Singleton groups are attached to the parent directly instead of being
    wrapped in a one-child cluster.
    """
    _, theta = config.require_thresholds()
    n = tree[node]
    if n.is_client or n.parent is None or len(n.children) < 2:
        return False
    kids = list(n.children)
    points = [tree[c].params for c in kids]
    for k in range(2, len(kids) + 1):
        labels = kmeans(points, k, stream(seed, "split", node, k))
        order = list(dict.fromkeys(labels))
        groups = [[c for c, lab in zip(kids, labels) if lab == g] for g in order]
        if all(len(g) == 1 for g in groups):
            continue
        scores = [incoherence([tree[c].params for c in g], config.metric) for g in groups]
        if all(s <= theta for s in scores):
            break
    else:
        return False

    parent = n.parent
    created = []
    for group in groups:
        if len(group) == 1:
            tree.reparent(group[0], parent)
            created.append(group[0])
        else:
            created.append(_regroup(tree, group, parent))
    tree.remove_internal(node)
    tree.refresh_params([parent])
    if log is not None:
        log.append({"op": "split", "nodes": [node, parent, *created],
                    "distances": {"k": k, "incoherence": scores}})
    return True


def _prune_all(tree: TreeTopology, log: list) -> None:
    changed = True
    while changed:
        changed = False
        for nid in tree.clusters():
            if nid in tree and len(tree[nid].children) <= 1:
                changed |= prune(tree, nid, log)


def shape_round(tree: TreeTopology, config: ShapeConfig, seed: int) -> list[dict]:
    """One pass of every operation in ``config.op_order``; returns the edit log.

    If prune is not the last operation, a final prune pass still runs so the
    round never ends with single-child clusters.
    """
    tau, theta = config.require_thresholds()
    log: list[dict] = []
    for op in config.op_order:
        if op == "graft":
            for nid in sorted(tree.nodes):
                if nid in tree and tree[nid].parent is not None:
                    graft(tree, nid, config, log)
        elif op == "merge":
            for pid in tree.clusters():
                while pid in tree:
                    kids = [c for c in tree[pid].children if not tree[c].is_client]
                    pairs = sorted(itertools.combinations(sorted(kids), 2))
                    if not pairs:
                        break
                    d, a, b = min((_dist(tree, a, b, config.metric), a, b) for a, b in pairs)
                    if not d < tau:
                        break
                    merge_siblings(tree, a, b, config, log)
        elif op == "split":
            for nid in tree.clusters():
                if nid not in tree or tree[nid].parent is None or len(tree[nid].children) < 2:
                    continue
                spread = incoherence([tree[c].params for c in tree[nid].children], config.metric)
                if spread > theta:
                    split(tree, nid, config, seed, log)
        elif op == "prune":
            _prune_all(tree, log)
    if config.op_order[-1] != "prune":
        _prune_all(tree, log)
    return log
