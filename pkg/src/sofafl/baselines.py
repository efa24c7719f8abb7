"""HypCluster and flat FedAvg under the same data, model and seed regime as SOFA-FL."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .data import Dataset, Shard
from .metrics import MetricsReport, build_report
from .model import ModelSpec, evaluate
from .orchestrator import local_train, prepare_shards, shared_init
from .topology import weighted_mean


@dataclass
class HypClusterState:
    k: int
    models: list[np.ndarray]
    assignment: dict[int, int] = field(default_factory=dict)


@dataclass
class BaselineResult:
    label: str
    config: RunConfig
    report: MetricsReport
    state: HypClusterState
    history: list[dict] = field(default_factory=list)
    trajectory: list[list[np.ndarray]] = field(default_factory=list)


def init_hypcluster(spec: ModelSpec, k: int, seed: int) -> HypClusterState:
    """Model j starts from the init stream ``j``, so model 0 matches SOFA-FL's shared init."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return HypClusterState(k, [shared_init(spec, seed, j) for j in range(k)])


def select_models(state: HypClusterState, shards: Sequence[Shard], spec: ModelSpec) -> dict[int, int]:
    """Each client picks the model with the lowest loss on its own training split."""
    picks = {}
    for shard in shards:
        losses = [evaluate(m, spec, shard.train.X, shard.train.y)[0] for m in state.models]
        picks[shard.client] = int(np.argmin(losses))
    return picks


def hypcluster_round(state: HypClusterState, shards: Sequence[Shard], spec: ModelSpec,
                     config: RunConfig, round_index: int) -> HypClusterState:
    picks = select_models(state, shards, spec)
    trained: dict[int, list[tuple[np.ndarray, int]]] = {j: [] for j in range(state.k)}
    for shard in shards:
        j = picks[shard.client]
        trained[j].append((local_train(state.models[j], spec, shard, config, round_index),
                           len(shard.train)))
    models = []
    for j in range(state.k):
        if trained[j]:
            models.append(weighted_mean([p for p, _ in trained[j]], [w for _, w in trained[j]]))
        else:
            models.append(state.models[j])
    return HypClusterState(state.k, models, picks)


def client_accuracies(state: HypClusterState, shards: Sequence[Shard], spec: ModelSpec) -> dict[int, float]:
    """Test accuracy of each client's assigned model."""
    return {s.client: evaluate(state.models[state.assignment[s.client]], spec, s.test.X, s.test.y)[1]
            for s in shards if len(s.test)}


def run_hypcluster(config: RunConfig, k: int, data: Dataset | Sequence[Shard]) -> BaselineResult:
    """Same partition, round and epoch budget as :func:`run_sofa`; no data sharing."""
    if isinstance(data, Dataset):
        shards = prepare_shards(config, data)
        num_classes = data.num_classes
    else:
        shards = list(data)
        num_classes = int(max(int(s.train.y.max()) for s in shards)) + 1
    spec = config.model_spec(shards[0].input_dim, num_classes)
    state = init_hypcluster(spec, k, config.seed)
    history, trajectory = [], []
    for r in range(1, config.rounds + 1):
        state = hypcluster_round(state, shards, spec, config, r)
        acc = client_accuracies(state, shards, spec)
        history.append({"round": r, "client_average": float(np.mean(list(acc.values()))),
                        "assignment": dict(state.assignment)})
        trajectory.append([m.copy() for m in state.models])
    if not state.assignment:
        state.assignment = select_models(state, shards, spec)
    report = build_report(client_accuracies(state, shards, spec))
    return BaselineResult(f"hypcluster_k{k}", config, report, state, history, trajectory)


def fedavg_trajectory(shards: Sequence[Shard], spec: ModelSpec, config: RunConfig,
                      rounds: int, first_round: int = 1) -> list[np.ndarray]:
    """Reference flat FedAvg: global model after each of ``rounds`` rounds.

    Round ``r`` trains every client from the current global model with the
    local stream for ``r``; the global model is the train-size-weighted mean.
    """
    global_model = shared_init(spec, config.seed)
    out = []
    for r in range(first_round, first_round + rounds):
        updates = [local_train(global_model, spec, s, config, r) for s in shards]
        global_model = weighted_mean(updates, [len(s.train) for s in shards])
        out.append(global_model)
    return out
