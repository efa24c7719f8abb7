"""Arena-backed rooted tree of clients (leaves) and cluster aggregators.

Nodes live in a dict keyed by an integer id that is never reused; removed
nodes are tombstoned.  Children are kept in insertion order and every
traversal walks them in that order, which keeps runs reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class TopologyError(ValueError):
    """Raised when a structural edit would break the tree."""


class NodeKind(str, enum.Enum):
    CLIENT = "client"
    CLUSTER = "cluster"


@dataclass
class TreeNode:
    id: int
    kind: NodeKind
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    params: np.ndarray | None = None
    data_weight: int = 0

    @property
    def is_client(self) -> bool:
        return self.kind is NodeKind.CLIENT


def weighted_mean(vectors: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Data-weighted average of parameter vectors.

    Falls back to the plain mean when every weight is zero.  The summation
    order is the order of ``vectors``, so identical inputs give identical bits.
    """
    if len(vectors) == 0:
        raise ValueError("weighted_mean of an empty sequence")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = float(w.sum())
    if total == 0.0:
        w = np.ones_like(w)
        total = float(len(w))
    acc = np.zeros_like(np.asarray(vectors[0], dtype=np.float64))
    for vec, wi in zip(vectors, w):
        acc += (wi / total) * vec
    return acc


class TreeTopology:
    """Mutable rooted tree.  Structural edits keep ``data_weight`` consistent."""

    def __init__(self):
        self.nodes: dict[int, TreeNode] = {}
        self.removed: set[int] = set()
        self.root: int | None = None
        self._next_id = 0

    # -- construction -------------------------------------------------------

    def add_client(self, params: np.ndarray | None = None, data_weight: int = 0,
                   node_id: int | None = None) -> int:
        if node_id is None:
            node_id = self._next_id
        if node_id in self.nodes or node_id in self.removed:
            raise TopologyError(f"node id {node_id} already used")
        if data_weight < 0:
            raise TopologyError("data_weight must be nonnegative")
        self.nodes[node_id] = TreeNode(node_id, NodeKind.CLIENT, params=params,
                                       data_weight=int(data_weight))
        self._next_id = max(self._next_id, node_id + 1)
        return node_id

    def add_cluster(self, children: Iterable[int], params: np.ndarray | None = None) -> int:
        """Create a cluster over ``children``.

        The children must currently share one parent (or all be parentless);
        the new cluster takes their place under that parent.  If one of them
        was the root, the new cluster becomes the root.
        """
        children = list(children)
        if not children:
            raise TopologyError("cannot create a cluster with no children")
        if len(set(children)) != len(children):
            raise TopologyError("duplicate child ids")
        for c in children:
            self._live(c)
        parents = {self.nodes[c].parent for c in children}
        if len(parents) != 1:
            raise TopologyError(f"children {children} do not share a parent")
        (old_parent,) = parents

        node_id = self._next_id
        self._next_id += 1
        node = TreeNode(node_id, NodeKind.CLUSTER, params=params)
        self.nodes[node_id] = node
        if old_parent is not None:
            siblings = self.nodes[old_parent].children
            slot = min(siblings.index(c) for c in children)
            for c in children:
                siblings.remove(c)
            siblings.insert(slot, node_id)
            node.parent = old_parent
        for c in children:
            self.nodes[c].parent = node_id
            node.children.append(c)
        node.data_weight = sum(self.nodes[c].data_weight for c in children)
        if self.root in children:
            self.root = node_id
        return node_id

    # -- edits --------------------------------------------------------------

    def reparent(self, child: int, new_parent: int) -> None:
        """Move ``child`` (with its subtree) under ``new_parent``."""
        node = self._live(child)
        target = self._live(new_parent)
        if target.is_client:
            raise TopologyError(f"node {new_parent} is a client and cannot take children")
        if new_parent in self.subtree(child):
            raise TopologyError(f"reparenting {child} under {new_parent} would form a cycle")
        old_parent = node.parent
        if old_parent == new_parent:
            return
        if old_parent is not None:
            self.nodes[old_parent].children.remove(child)
        elif self.root == child:
            raise TopologyError("cannot reparent the root")
        node.parent = new_parent
        target.children.append(child)
        if old_parent is not None:
            self._refresh_weights(old_parent)
        self._refresh_weights(new_parent)

    def detach(self, child: int) -> None:
        """Make ``child`` parentless (used when promoting a node to root)."""
        node = self._live(child)
        if node.parent is None:
            return
        parent = node.parent
        self.nodes[parent].children.remove(child)
        node.parent = None
        self._refresh_weights(parent)

    def remove_internal(self, node_id: int) -> None:
        """Tombstone a childless cluster, unlinking it from its parent."""
        node = self._live(node_id)
        if node.is_client:
            raise TopologyError(f"node {node_id} is a client; clients are never removed")
        if node.children:
            raise TopologyError(f"node {node_id} still has children {node.children}")
        if node.parent is not None:
            parent = node.parent
            self.nodes[parent].children.remove(node_id)
            self._refresh_weights(parent)
        if self.root == node_id:
            self.root = None
        del self.nodes[node_id]
        self.removed.add(node_id)

    def set_weight(self, client: int, data_weight: int) -> None:
        node = self._live(client)
        if not node.is_client:
            raise TopologyError(f"node {client} is not a client")
        node.data_weight = int(data_weight)
        self._refresh_weights(node.parent)

    def _refresh_weights(self, start: int | None) -> None:
        cur = start
        while cur is not None:
            node = self.nodes[cur]
            node.data_weight = sum(self.nodes[c].data_weight for c in node.children)
            cur = node.parent

    # -- parameters ---------------------------------------------------------

    def aggregate(self, node_id: int) -> np.ndarray:
        node = self.nodes[node_id]
        kids = [self.nodes[c] for c in node.children]
        return weighted_mean([k.params for k in kids], [k.data_weight for k in kids])

    def refresh_params(self, start: Iterable[int]) -> None:
        """Recompute cluster params for the given nodes and all their ancestors."""
        pending = set()
        for s in start:
            cur = s if s in self.nodes else None
            while cur is not None:
                pending.add(cur)
                cur = self.nodes[cur].parent
        for nid in sorted(pending, key=self.depth, reverse=True):
            node = self.nodes[nid]
            if not node.is_client and node.children:
                node.params = self.aggregate(nid)

    def aggregate_all(self) -> None:
        """Bottom-up weighted-mean aggregation over the whole tree."""
        for nid in self.postorder():
            node = self.nodes[nid]
            if not node.is_client and node.children:
                node.params = self.aggregate(nid)

    # -- queries ------------------------------------------------------------

    def _live(self, node_id: int) -> TreeNode:
        if node_id in self.removed:
            raise TopologyError(f"node {node_id} has been removed")
        try:
            return self.nodes[node_id]
        except KeyError:
            raise TopologyError(f"unknown node id {node_id}") from None

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    def __getitem__(self, node_id: int) -> TreeNode:
        return self._live(node_id)

    def __len__(self) -> int:
        return len(self.nodes)

    def clients(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.is_client)

    def clusters(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if not n.is_client)

    def depth(self, node_id: int) -> int:
        d = 0
        cur = self.nodes[node_id].parent
        while cur is not None:
            d += 1
            cur = self.nodes[cur].parent
        return d

    def height(self) -> int:
        """Number of levels on the longest root-to-leaf path (a lone leaf is 1)."""
        if self.root is None:
            return 0
        return 1 + max(self.depth(c) for c in self.clients())

    def subtree(self, node_id: int) -> list[int]:
        out, stack = [], [node_id]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(reversed(self.nodes[cur].children))
        return out

    def leaves_under(self, node_id: int) -> list[int]:
        return sorted(n for n in self.subtree(node_id) if self.nodes[n].is_client)

    def preorder(self) -> list[int]:
        return [] if self.root is None else self.subtree(self.root)

    def postorder(self) -> list[int]:
        if self.root is None:
            return []
        out: list[int] = []

        def visit(n):
            for c in self.nodes[n].children:
                visit(c)
            out.append(n)

        visit(self.root)
        return out

    def snapshot(self, round_index: int) -> dict:
        return {
            "round": round_index,
            "root": self.root,
            "nodes": [
                {
                    "id": n.id,
                    "kind": n.kind.value,
                    "parent": n.parent,
                    "children": list(n.children),
                    "data_weight": n.data_weight,
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
        }


def validate(tree: TreeTopology, strict: bool = False) -> list[str]:
    """List every broken invariant; an empty list means the tree is sound.

    With ``strict`` a cluster with a single child is also reported (the
    norm outside of mid-round edits).
    """
    problems: list[str] = []
    nodes = tree.nodes
    if not nodes:
        return problems
    for nid in tree.removed & set(nodes):
        problems.append(f"node {nid} is both live and removed")
    if tree.root is None:
        problems.append("tree has nodes but no root")
        return problems
    if tree.root not in nodes:
        problems.append(f"root {tree.root} is not a live node")
        return problems
    if nodes[tree.root].parent is not None:
        problems.append(f"root {tree.root} has parent {nodes[tree.root].parent}")

    for node in nodes.values():
        if node.parent is None and node.id != tree.root:
            problems.append(f"node {node.id} has no parent but is not the root")
        if node.parent is not None:
            if node.parent not in nodes:
                problems.append(f"node {node.id} points to missing parent {node.parent}")
            elif node.id not in nodes[node.parent].children:
                problems.append(f"node {node.id} names parent {node.parent} which does not list it")
        if len(set(node.children)) != len(node.children):
            problems.append(f"node {node.id} lists a child twice")
        for c in node.children:
            if c not in nodes:
                problems.append(f"node {node.id} lists missing child {c}")
            elif nodes[c].parent != node.id:
                problems.append(f"node {c} is listed under {node.id} but names parent {nodes[c].parent}")
        if node.is_client:
            if node.children:
                problems.append(f"client {node.id} has children")
        else:
            if not node.children:
                problems.append(f"cluster {node.id} has no children")
            elif strict and len(node.children) == 1:
                problems.append(f"cluster {node.id} has a single child")
            expected = sum(nodes[c].data_weight for c in node.children if c in nodes)
            if node.data_weight != expected:
                problems.append(
                    f"cluster {node.id} data_weight {node.data_weight} != children sum {expected}")
        if node.data_weight < 0:
            problems.append(f"node {node.id} has negative data_weight")

    seen: set[int] = set()
    stack = [tree.root]
    while stack:
        cur = stack.pop()
        if cur in seen:
            problems.append(f"node {cur} reached twice from the root (cycle or shared child)")
            continue
        seen.add(cur)
        stack.extend(c for c in nodes[cur].children if c in nodes)
    for nid in sorted(set(nodes) - seen):
        problems.append(f"node {nid} is not reachable from the root")
    return problems
