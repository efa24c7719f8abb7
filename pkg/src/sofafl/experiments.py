"""Experiment drivers shared by the CLI, the demos and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .data import Dataset, Samples, Shard, make_synthetic_task, split_train_test, synthetic_clusters
from .orchestrator import SofaResult, run_sofa
from .rng import stream

ABLATION_ROWS = (
    ("without partial data sharing", {"sharing_mode": "off", "sharing_ratio": 0.0}),
    ("partial data sharing ratio 0.1", {"sharing_mode": "fresh", "sharing_ratio": 0.1}),
    ("partial data sharing ratio 0.1 fixed", {"sharing_mode": "fixed", "sharing_ratio": 0.1}),
    ("partial data sharing ratio 0.2 fixed", {"sharing_mode": "fixed", "sharing_ratio": 0.2}),
)


@dataclass
class AblationRow:
    label: str
    client_average: float
    total_average: float
    mean_loss_spike: float
    result: SofaResult

    def summary(self) -> dict:
        return {"label": self.label, "client_average": self.client_average,
                "total_average": self.total_average, "mean_loss_spike": self.mean_loss_spike}


def mean_loss_spike(result: SofaResult, first_round: int = 2) -> float:
    """Average jump of client training loss at round start, over rounds >= ``first_round``.

    The jump for one client is its loss on the round's training set before
    local training minus its loss at the end of the previous round.
    """
    spikes = [rec.loss_spike for rec in result.records if rec.round >= first_round]
    return float(np.mean(spikes)) if spikes else 0.0


def run_ablation(config: RunConfig, data: Dataset) -> list[AblationRow]:
    rows = []
    for label, overrides in ABLATION_ROWS:
        result = run_sofa(config.replace(**overrides), data)
        rows.append(AblationRow(label, result.client_average, result.total_average,
                                mean_loss_spike(result), result))
    return rows


@dataclass
class DriftOutcome:
    client: int
    swap_round: int
    graft_round: int | None
    result: SofaResult

    @property
    def rounds_to_graft(self) -> int | None:
        return None if self.graft_round is None else self.graft_round - self.swap_round


def drift_scenario(config: RunConfig, *, clients_per_cluster: int = 4, samples_per_client: int = 120,
                   input_dim: int = 8, num_classes: int = 4, separation: float = 10.0,
                   swap_round: int = 10, client: int = 0) -> DriftOutcome:
    """Two synthetic client groups; ``client`` starts drawing from the other group at ``swap_round``.

    Returns the first round at or after the swap whose SHAPE log grafts that
    client, either directly or as a leaf of a grafted subtree.
    """
    task = make_synthetic_task(2, input_dim, num_classes, separation, config.seed)
    shards = synthetic_clusters(2, clients_per_cluster, samples_per_client, input_dim, num_classes,
                                separation, config.seed, task=task)
    shards = split_train_test(shards, config.test_fraction, config.seed)
    home = client // clients_per_cluster

    def swap(r, current):
        if r != swap_round:
            return None
        out = []
        for shard in current:
            if shard.client != client:
                out.append(shard)
                continue
            rng = stream(config.seed, "drift", client)
            n_train, n_test = len(shard.train), len(shard.test)
            X, y = task.sample(1 - home, n_train + n_test, rng)
            ids = np.column_stack([np.full(len(y), client), np.arange(len(y))])
            fresh = Samples(ids, X, y)
            out.append(Shard(client, fresh.take(np.arange(n_train)),
                             fresh.take(np.arange(n_train, n_train + n_test)), shard.received))
        return out

    result = run_sofa(config.replace(num_clients=2 * clients_per_cluster), shards, on_round_start=swap)
    graft_round = None
    for edits in result.edit_logs:
        hits = [e for e in edits
                if e["op"] == "graft" and client in e["leaves"] and e["round"] >= swap_round]
        if hits:
            graft_round = hits[0]["round"]
            break
    return DriftOutcome(client, swap_round, graft_round, result)
