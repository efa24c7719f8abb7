"""Accuracy and fairness statistics over per-client results."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np


def jain_index(values: Sequence[float]) -> float:
    """(sum x)^2 / (n * sum x^2); 1 when all values are equal."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("jain_index of an empty sequence")
    if np.any(x < 0):
        raise ValueError("jain_index expects nonnegative values")
    sq = float(np.dot(x, x))
    if sq == 0.0:
        raise ValueError("jain_index is undefined when every value is zero")
    return float(x.sum() ** 2 / (x.size * sq))


@dataclass
class MetricsReport:
    mean_accuracy: float
    std_deviation: float
    min_accuracy: float
    max_accuracy: float
    accuracy_gap: float
    jain_index: float
    bottom_decile_mean: float
    per_client: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_client"] = {str(k): v for k, v in sorted(self.per_client.items())}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsReport":
        d = dict(d)
        d["per_client"] = {int(k): float(v) for k, v in d.get("per_client", {}).items()}
        fields = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in fields})


def build_report(per_client: Mapping[int, float] | Sequence[float]) -> MetricsReport:
    """Mean, population std, min, gap, Jain index and the mean of the lowest ceil(n/10)."""
    if not isinstance(per_client, Mapping):
        per_client = dict(enumerate(per_client))
    if not per_client:
        raise ValueError("build_report needs at least one client")
    acc = np.array(sorted(float(v) for v in per_client.values()))
    bottom = acc[:math.ceil(len(acc) / 10)]
    jain = jain_index(acc) if np.any(acc > 0) else 0.0
    return MetricsReport(
        mean_accuracy=float(acc.mean()),
        std_deviation=float(acc.std()),
        min_accuracy=float(acc[0]),
        max_accuracy=float(acc[-1]),
        accuracy_gap=float(acc[-1] - acc[0]),
        jain_index=jain,
        bottom_decile_mean=float(bottom.mean()),
        per_client={int(k): float(v) for k, v in per_client.items()},
    )
