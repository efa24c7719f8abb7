"""Random fixtures shared by the unit and acceptance suites."""

from __future__ import annotations

import numpy as np

from sofafl.shape import ShapeConfig
from sofafl.topology import TreeTopology


def random_tree(rng: np.random.Generator, n_leaves: int, dim: int = 3) -> TreeTopology:
    """A random multi-branch hierarchy over clustered Gaussian leaf params."""
    tree = TreeTopology()
    centres = rng.normal(0, 5, size=(int(rng.integers(1, 5)), dim))
    leaves = []
    for _ in range(n_leaves):
        c = centres[rng.integers(len(centres))]
        leaves.append(tree.add_client(c + rng.normal(0, 1, dim), int(rng.integers(1, 50))))

    def group(nodes):
        if len(nodes) <= 3:
            return tree.add_cluster(nodes) if len(nodes) > 1 else nodes[0]
        parts = int(rng.integers(2, min(4, len(nodes)) + 1))
        cuts = np.sort(rng.choice(np.arange(1, len(nodes)), size=parts - 1, replace=False))
        subs = [group(list(chunk)) for chunk in np.split(np.array(nodes), cuts)]
        return tree.add_cluster(subs)

    order = list(rng.permutation(leaves))
    tree.root = group([int(x) for x in order]) if n_leaves > 1 else leaves[0]
    tree.aggregate_all()
    return tree


def random_shape_config(rng: np.random.Generator) -> ShapeConfig:
    ops = ["graft", "merge", "split", "prune"]
    rng.shuffle(ops)
    tau = float(rng.uniform(0.1, 6.0))
    return ShapeConfig(epsilon=float(rng.uniform(0, 0.3)), tau_merge=tau,
                       theta_split=float(tau * rng.uniform(0.5, 3.0)), op_order=tuple(ops))
