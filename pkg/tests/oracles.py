"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except for plain data containers,
so agreement with the library is evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def numeric_gradient(f, params: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar function ``f`` at ``params``."""
    grad = np.zeros_like(params)
    p = params.copy()
    for i in range(len(p)):
        orig = p[i]
        p[i] = orig + h
        up = f(p)
        p[i] = orig - h
        down = f(p)
        p[i] = orig
        grad[i] = (up - down) / (2 * h)
    return grad


def reference_mlp_loss(params: np.ndarray, dims: list[int], X: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax cross-entropy of a ReLU MLP, written independently of sofafl.model."""
    offset, h = 0, X
    for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        W = params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset:offset + fan_out]
        offset += fan_out
        h = h @ W + b
        if layer < len(dims) - 2:
            h = np.maximum(h, 0.0)
    z = h - h.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(y)), y].mean())


def gradients_agree(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-4, floor: float = 1e-6) -> bool:
    """Elementwise |a - n| <= rtol * max(|a|, |n|, floor / rtol)."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor / rtol)
    return bool(np.all(np.abs(analytic - numeric) <= rtol * scale))


def brute_force_dmac(points: list[np.ndarray], weights: list[float], gamma: float) -> list[list[list[int]]]:
    """Threshold-component agglomeration executed by explicit enumeration.

    Each step computes every pairwise Euclidean distance among active clusters,
    takes tau as the minimum, links every pair within tau * gamma and merges
    the linked groups found by flood fill.  Returns, per step, the merged groups
    as sorted lists of original leaf indices.
    """
    active = [([i], np.asarray(p, dtype=float), float(w)) for i, (p, w) in enumerate(zip(points, weights))]
    trace = []
    while len(active) > 1:
        n = len(active)
        dist = {}
        for i, j in itertools.combinations(range(n), 2):
            dist[i, j] = math.sqrt(float(np.sum((active[i][1] - active[j][1]) ** 2)))
        tau = min(dist.values())
        band = math.inf if math.isinf(gamma) else tau * gamma
        adj = {i: set() for i in range(n)}
        for (i, j), d in dist.items():
            if d <= band:
                adj[i].add(j)
                adj[j].add(i)
        seen, groups = set(), []
        for start in range(n):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            groups.append(sorted(comp))
        step, nxt = [], []
        for comp in groups:
            if len(comp) == 1:
                nxt.append(active[comp[0]])
                continue
            leaves = sorted(l for c in comp for l in active[c][0])
            total = sum(active[c][2] for c in comp)
            if total > 0:
                centre = sum(active[c][2] / total * active[c][1] for c in comp)
            else:
                centre = sum(active[c][1] for c in comp) / len(comp)
            nxt.append((leaves, centre, total))
            step.append(leaves)
        trace.append(sorted(step))
        active = nxt
    return trace


def best_two_partition(values: list[float]) -> tuple[frozenset, frozenset]:
    """Exhaustive minimum within-group sum of squares over all 2-partitions of 1-D values."""
    n = len(values)
    best, best_cost = None, math.inf
    for mask in range(1, 2 ** (n - 1)):
        a = [i for i in range(n) if (mask >> i) & 1]
        b = [i for i in range(n) if not (mask >> i) & 1]
        cost = 0.0
        for grp in (a, b):
            m = sum(values[i] for i in grp) / len(grp)
            cost += sum((values[i] - m) ** 2 for i in grp)
        if cost < best_cost:
            best, best_cost = (frozenset(a), frozenset(b)), cost
    return best
