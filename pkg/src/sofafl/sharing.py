"""Two-phase partial data sharing over the cluster tree.

Gather walks the tree bottom-up: each client offers a random fraction of its
training split, and each cluster pools its children's offers and forwards a
random fraction of that pool to its own parent.  Distribute walks top-down:
every client receives the pools of all its ancestors, minus its own samples.
Received sets are replaced each round, never accumulated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .data import Samples, Shard
from .rng import stream
from .topology import TreeTopology


class SharingMode(str, enum.Enum):
    FRESH = "fresh"
    FIXED = "fixed"
    OFF = "off"


@dataclass(frozen=True)
class SharingConfig:
    ratio: float = 0.1
    mode: SharingMode = SharingMode.FRESH
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("sharing ratio must lie in [0, 1]")
        object.__setattr__(self, "mode", SharingMode(self.mode))

    @property
    def active(self) -> bool:
        return self.mode is not SharingMode.OFF and self.ratio > 0


def share_count(ratio: float, n: int) -> int:
    """ceil(ratio * n), but at least one sample from a nonempty set."""
    if n == 0:
        return 0
    # the tolerance keeps e.g. 0.1 * 30 from rounding up to 4
    return min(n, max(1, math.ceil(ratio * n - 1e-9)))


def _rng(config: SharingConfig, round_index: int, node: int) -> np.random.Generator:
    if config.mode is SharingMode.FIXED:
        return stream(config.seed, "share", node)
    return stream(config.seed, "share", round_index, node)


def _subsample(samples: Samples, ratio: float, rng: np.random.Generator) -> Samples:
    k = share_count(ratio, len(samples))
    if k == 0:
        return samples
    return samples.take(np.sort(rng.choice(len(samples), size=k, replace=False)))


def _by_client(shards: Sequence[Shard]) -> dict[int, Shard]:
    return {s.client: s for s in shards}


def gather(tree: TreeTopology, shards: Sequence[Shard], config: SharingConfig,
           round_index: int) -> dict[int, Samples]:
    """Pools per cluster node, deduplicated and sorted by SampleId."""
    by_client = _by_client(shards)
    dim = next(iter(by_client.values())).input_dim
    pools: dict[int, Samples] = {}
    if not config.active:
        return pools
    offers: dict[int, Samples] = {}
    for nid in tree.postorder():
        node = tree[nid]
        if node.is_client:
            if nid not in by_client:
                raise KeyError(f"client {nid} has no shard")
            offers[nid] = _subsample(by_client[nid].train, config.ratio, _rng(config, round_index, nid))
        else:
            pool = Samples.union([offers[c] for c in node.children], dim).sorted()
            pools[nid] = pool
            if node.parent is not None:
                offers[nid] = _subsample(pool, config.ratio, _rng(config, round_index, nid))
    return pools


def distribute(tree: TreeTopology, shards: Sequence[Shard], pools: dict[int, Samples]) -> list[Shard]:
    """New shards whose ``received`` sets hold every ancestor pool, minus own samples."""
    by_client = _by_client(shards)
    dim = next(iter(by_client.values())).input_dim
    empty = Samples.empty(dim)
    incoming: dict[int, Samples] = {}
    out = {}
    for nid in tree.preorder():
        node = tree[nid]
        above = incoming.get(node.parent, empty) if node.parent is not None else empty
        if node.is_client:
            shard = by_client[nid]
            received = above.without(shard.owned.keys())
            out[nid] = replace(shard, received=received)
        else:
            incoming[nid] = Samples.union([above, pools.get(nid, empty)], dim)
    return [out.get(s.client, replace(s, received=empty)) for s in shards]


def share_round(tree: TreeTopology, shards: Sequence[Shard], config: SharingConfig,
                round_index: int) -> list[Shard]:
    return distribute(tree, shards, gather(tree, shards, config, round_index))


def sharing_summary(tree: TreeTopology, shards: Sequence[Shard]) -> list[dict]:
    """Per-client counts of received samples from the same direct cluster vs elsewhere."""
    rows = []
    for shard in shards:
        parent = tree[shard.client].parent
        siblings = set(tree[parent].children) if parent is not None else set()
        origins = shard.received.ids[:, 0]
        same = int(sum(int(o) in siblings for o in origins))
        rows.append({"client": shard.client, "n_received": len(shard.received),
                     "n_same_cluster": same, "n_cross_cluster": len(origins) - same})
    return rows
