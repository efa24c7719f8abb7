"""The SOFA-FL training loop.

Per run: partition data, warm up every client from one shared
initialisation, build the cluster tree with DMAC, then for each round train
clients locally, aggregate up the tree, evaluate every node, restructure the
tree and share data for the next round.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .clustering import Metric, dmac_build, pairwise_distance
from .config import RunConfig
from .data import Dataset, Shard, dirichlet_partition, split_train_test
from .metrics import MetricsReport, build_report
from .model import ModelSpec, evaluate, init_params, sgd_epochs
from .rng import derive_seed, stream
from .shape import calibrate_thresholds, shape_round
from .sharing import share_round, sharing_summary
from .topology import TreeTopology, validate

log = logging.getLogger(__name__)


class InvariantError(RuntimeError):
    """A tree invariant failed mid-run."""


@dataclass
class RoundRecord:
    round: int
    nodes: list[dict]
    objective: dict
    edit_count: int
    sharing: list[dict]
    client_average: float
    total_average: float
    loss_spike: float

    def client_rows(self) -> list[dict]:
        return [n for n in self.nodes if n["kind"] == "client"]


@dataclass
class SofaResult:
    config: RunConfig
    spec: ModelSpec
    records: list[RoundRecord]
    report: MetricsReport
    tree: TreeTopology
    shards: list[Shard]
    edit_logs: list[list[dict]] = field(default_factory=list)
    snapshots: list[dict] = field(default_factory=list)
    root_trajectory: list[np.ndarray] = field(default_factory=list)

    @property
    def client_average(self) -> float:
        return self.records[-1].client_average

    @property
    def total_average(self) -> float:
        return self.records[-1].total_average


def prepare_shards(config: RunConfig, data: Dataset) -> list[Shard]:
    shards = dirichlet_partition(data, config.num_clients, config.dirichlet_alpha, config.seed,
                                 min_size=config.min_client_samples)
    return split_train_test(shards, config.test_fraction, config.seed)


def local_train(params: np.ndarray, spec: ModelSpec, shard: Shard, config: RunConfig,
                round_index: int, epochs: int | None = None,
                prox: tuple[float, np.ndarray] | None = None) -> np.ndarray:
    """One client's local update, seeded by (run seed, client, round)."""
    X, y = shard.training_set()
    return sgd_epochs(params, spec, X, y, lr=config.lr,
                      epochs=config.local_epochs if epochs is None else epochs,
                      batch_size=config.batch_size,
                      rng=stream(config.seed, "local", shard.client, round_index),
                      prox=prox, mode=config.local_steps_mode)


def shared_init(spec: ModelSpec, seed: int, index: int = 0) -> np.ndarray:
    return init_params(spec, stream(seed, "init", index))


def warmup_and_cluster(shards: Sequence[Shard], config: RunConfig,
                       spec: ModelSpec) -> tuple[TreeTopology, dict[int, np.ndarray]]:
    """Train every client from the shared init, then build the tree with DMAC.

    With ``cluster_signature="update"`` DMAC groups the directions of the
    warm-up updates; the tree is then reloaded with params.
    """
    init = shared_init(spec, config.seed)
    params = {s.client: local_train(init, spec, s, config, 0, epochs=config.warmup_epochs)
              for s in shards}
    vectors = params
    if config.cluster_signature == "update":
        vectors = {c: update_signature(init, p) for c, p in params.items()}
    tree = dmac_build([(s.client, vectors[s.client], len(s.train)) for s in shards], config.dmac())
    if vectors is not params:
        aggregate_up(tree, params)
    problems = validate(tree)
    if problems:
        raise InvariantError(f"DMAC produced an invalid tree: {problems}")
    return tree, params


def aggregate_up(tree: TreeTopology, client_params: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Load client params into the tree and recompute every cluster bottom-up."""
    for cid, p in client_params.items():
        tree[cid].params = p
    tree.aggregate_all()
    return {nid: tree[nid].params for nid in tree.clusters()}


def update_signature(before: np.ndarray, after: np.ndarray) -> np.ndarray:
    """Unit-length direction of a local update (zero if the model did not move)."""
    step = after - before
    norm = float(np.linalg.norm(step))
    return step / norm if norm > 0 else step


def shape_on_signatures(tree: TreeTopology, signatures: dict[int, np.ndarray], config,
                        seed: int) -> list[dict]:
    """Run ``shape_round`` with client vectors swapped for ``signatures``, then restore params.

    Structural edits only read distances, so SHAPE sees the signature geometry
    while the tree keeps its model params afterwards.
    """
    params = {c: tree[c].params for c in tree.clients()}
    aggregate_up(tree, signatures)
    try:
        return shape_round(tree, config, seed)
    finally:
        aggregate_up(tree, params)


def _samples_under(tree: TreeTopology, node: int, by_client: dict[int, Shard], part: str):
    pieces = []
    for c in tree.leaves_under(node):
        shard = by_client[c]
        if part == "test":
            pieces.append((shard.test.X, shard.test.y))
        else:
            pieces.append(shard.training_set())
    X = np.concatenate([p[0] for p in pieces])
    y = np.concatenate([p[1] for p in pieces])
    return X, y


def node_train_loss(tree: TreeTopology, node: int, by_client: dict[int, Shard], spec: ModelSpec) -> float:
    X, y = _samples_under(tree, node, by_client, "train")
    return evaluate(tree[node].params, spec, X, y)[0]


def evaluate_nodes(tree: TreeTopology, shards: Sequence[Shard], spec: ModelSpec) -> dict[int, tuple[float, float]]:
    """(test loss, test accuracy) per node; clusters use the union of descendant test splits."""
    by_client = {s.client: s for s in shards}
    out = {}
    for nid in tree.preorder():
        X, y = _samples_under(tree, nid, by_client, "test")
        if len(y):
            out[nid] = evaluate(tree[nid].params, spec, X, y)
    return out


def objective_value(tree: TreeTopology, shards: Sequence[Shard], spec: ModelSpec,
                    alpha: float = 0.0, beta: float = 0.0,
                    metric: Metric | str = Metric.EUCLIDEAN,
                    losses: dict[int, float] | None = None) -> tuple[float, float, float, float]:
    """(total, weighted loss, sibling spread, child-to-parent spread).

    Clusters j range over all internal nodes and C_j are their direct
    children.  Cluster weights are proportional to their data weight;
    child weights are normalised within each cluster.
    """
    by_client = {s.client: s for s in shards}
    clusters = tree.clusters()
    if losses is None:
        losses = {}
    total_weight = sum(tree[j].data_weight for j in clusters)
    term1 = term2 = term3 = 0.0
    for j in clusters:
        node = tree[j]
        kids = node.children
        w_j = node.data_weight / total_weight if total_weight else 1.0 / len(clusters)
        inner = 0.0
        for u in kids:
            if u not in losses:
                losses[u] = node_train_loss(tree, u, by_client, spec)
            w_u = tree[u].data_weight / node.data_weight if node.data_weight else 1.0 / len(kids)
            inner += w_u * losses[u]
        term1 += w_j * inner
        if alpha:
            pair_sum = sum(pairwise_distance(tree[a].params, tree[b].params, metric)
                           for a, b in itertools.combinations(kids, 2))
            term2 += alpha * pair_sum / len(kids)
        if beta:
            term3 += beta * sum(pairwise_distance(tree[u].params, node.params, metric) for u in kids)
    return term1 + term2 + term3, term1, term2, term3


def _node_rows(tree, evals, start, end, losses):
    rows = []
    for nid in sorted(tree.nodes):
        n = tree[nid]
        test_loss, test_acc = evals.get(nid, (float("nan"), float("nan")))
        rows.append({
            "node": nid,
            "kind": n.kind.value,
            "parent": n.parent,
            "data_weight": n.data_weight,
            "train_loss_start": start.get(nid, float("nan")),
            "train_loss_end": end.get(nid, losses.get(nid, float("nan"))),
            "test_loss": test_loss,
            "test_acc": test_acc,
        })
    return rows


def _averages(tree, evals):
    client_acc = [evals[c][1] for c in tree.clients() if c in evals]
    all_acc = [v[1] for v in evals.values()]
    return float(np.mean(client_acc)), float(np.mean(all_acc))


RoundHook = Callable[[int, list[Shard]], "list[Shard] | None"]


def run_sofa(config: RunConfig, data: Dataset | Sequence[Shard], *,
             on_round_start: RoundHook | None = None) -> SofaResult:
    """Run the full loop; ``data`` is a dataset to partition or ready-made shards.

    ``on_round_start(round, shards)`` may return replacement shards (used to
    inject distribution drift).
    """
    if isinstance(data, Dataset):
        shards = prepare_shards(config, data)
        num_classes = data.num_classes
    else:
        shards = list(data)
        num_classes = int(max(int(s.train.y.max()) for s in shards if len(s.train))) + 1
    spec = config.model_spec(shards[0].input_dim, num_classes)
    sharing_cfg = config.sharing()
    lam, beta = config.downward_mix, config.objective_beta

    tree, params = warmup_and_cluster(shards, config, spec)
    use_updates = config.cluster_signature == "update"
    if use_updates:
        init = shared_init(spec, config.seed)
        signatures = {c: update_signature(init, p) for c, p in params.items()}
        aggregate_up(tree, signatures)
        shape_cfg = calibrate_thresholds(tree, config.shape())
        aggregate_up(tree, params)
    else:
        shape_cfg = calibrate_thresholds(tree, config.shape())
    log.info("tree built: %d clients, height %d, tau_merge=%.4g theta_split=%.4g",
             len(shards), tree.height(), shape_cfg.tau_merge, shape_cfg.theta_split)

    by_client = {s.client: s for s in shards}
    end_loss = {c: evaluate(params[c], spec, *by_client[c].training_set())[0] for c in params}
    records, edit_logs, snapshots = [], [], [tree.snapshot(0)]
    root_traj = [tree[tree.root].params.copy()]

    def record(r, start, edits, summary):
        evals = evaluate_nodes(tree, shards, spec)
        losses = dict(end_loss)
        total, t1, t2, t3 = objective_value(tree, shards, spec, config.objective_alpha, beta,
                                            config.metric, losses)
        client_avg, total_avg = _averages(tree, evals)
        spikes = [start[c] - prev_end[c] for c in start] if start else []
        records.append(RoundRecord(
            round=r,
            nodes=_node_rows(tree, evals, start, end_loss, losses),
            objective={"total": total, "term1": t1, "term2": t2, "term3": t3},
            edit_count=edits,
            sharing=summary,
            client_average=client_avg,
            total_average=total_avg,
            loss_spike=float(np.mean(spikes)) if spikes else 0.0,
        ))

    prev_end = dict(end_loss)
    record(0, {}, 0, sharing_summary(tree, shards))

    for r in range(1, config.rounds + 1):
        if on_round_start is not None:
            replaced = on_round_start(r, shards)
            if replaced is not None:
                shards = list(replaced)
                by_client = {s.client: s for s in shards}
                for s in shards:
                    tree.set_weight(s.client, len(s.train))
        prev_end = dict(end_loss)
        start, new_params = {}, {}
        for c in tree.clients():
            shard = by_client[c]
            x = params[c]
            parent = tree[c].parent
            if parent is not None and lam > 0:
                anchor_params = tree[parent].params
                x = anchor_params.copy() if lam == 1.0 else (1.0 - lam) * x + lam * anchor_params
            prox = (beta, tree[parent].params) if parent is not None and beta > 0 else None
            X, y = shard.training_set()
            start[c] = evaluate(x, spec, X, y)[0]
            new_params[c] = local_train(x, spec, shard, config, r, prox=prox)
            end_loss[c] = evaluate(new_params[c], spec, X, y)[0]
            if use_updates:
                signatures[c] = update_signature(x, new_params[c])
        params = new_params
        aggregate_up(tree, params)
        root_traj.append(tree[tree.root].params.copy())

        edits: list[dict] = []
        if config.shape_every and r % config.shape_every == 0 and len(tree.clients()) > 1:
            shape_seed = derive_seed(config.seed, "shape", r)
            if use_updates:
                edits = shape_on_signatures(tree, signatures, shape_cfg, shape_seed)
            else:
                edits = shape_round(tree, shape_cfg, shape_seed)
            for e in edits:
                e["round"] = r
            problems = validate(tree)
            if problems:
                raise InvariantError(f"round {r}: tree invalid after SHAPE: {problems}; edits: {edits}")
        edit_logs.append(edits)

        # evaluate on the training sets used this round, before sharing replaces them
        record(r, start, len(edits), [])
        if sharing_cfg.active:
            shards = share_round(tree, shards, sharing_cfg, r)
            by_client = {s.client: s for s in shards}
        records[-1].sharing = sharing_summary(tree, shards)
        snapshots.append(tree.snapshot(r))

    final = {c: acc for c, (_, acc) in evaluate_nodes(tree, shards, spec).items() if tree[c].is_client}
    return SofaResult(config, spec, records, build_report(final), tree, shards,
                      edit_logs, snapshots, root_traj)
