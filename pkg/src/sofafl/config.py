"""Run configuration and its flat JSON file format.

A config file is a single JSON object of ``key: value`` pairs plus a
``schema_version``.  Every key is optional; missing keys take the defaults
below, so an empty object ``{"schema_version": 1}`` is a valid config.
"""

from __future__ import annotations

import dataclasses
import json
import math
import pathlib
from dataclasses import dataclass

from .clustering import DmacConfig, Metric
from .model import ModelSpec
from .shape import OPS, ShapeConfig
from .sharing import SharingConfig, SharingMode

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    num_clients: int = 20
    rounds: int = 20
    local_epochs: int = 5
    warmup_epochs: int = 5
    local_steps_mode: str = "epochs"
    lr: float = 0.05
    batch_size: int = 32
    hidden_dims: tuple[int, ...] = (128, 64)
    dirichlet_alpha: float = 1.0
    test_fraction: float = 0.1
    min_client_samples: int = 10
    seed: int = 0

    sharing_ratio: float = 0.1
    sharing_mode: str = "fresh"

    dmac_gamma: float = 1.5
    metric: str = "euclidean"
    # vectors compared by DMAC and SHAPE: model params, or each client's latest local update
    cluster_signature: str = "params"

    shape_every: int = 1
    shape_epsilon: float = 0.05
    shape_tau_merge: float | None = None
    shape_theta_split: float | None = None
    shape_op_order: tuple[str, ...] = ("graft", "merge", "split", "prune")

    objective_alpha: float = 0.0
    objective_beta: float = 0.0
    downward_mix: float = 0.0

    def __post_init__(self):
        self.hidden_dims = tuple(self.hidden_dims)
        self.shape_op_order = tuple(self.shape_op_order)
        self.validate()

    def validate(self) -> None:
        def need(name, ok, msg):
            if not ok:
                raise ConfigError(name, msg)

        for name in ("num_clients", "batch_size"):
            need(name, isinstance(getattr(self, name), int) and getattr(self, name) >= 1, "must be an integer >= 1")
        for name in ("rounds", "local_epochs", "warmup_epochs", "shape_every", "seed", "min_client_samples"):
            need(name, isinstance(getattr(self, name), int) and getattr(self, name) >= 0, "must be an integer >= 0")
        need("local_steps_mode", self.local_steps_mode in ("epochs", "steps"), "must be 'epochs' or 'steps'")
        need("lr", self.lr > 0, "must be > 0")
        need("hidden_dims", all(isinstance(h, int) and h >= 1 for h in self.hidden_dims), "must be positive integers")
        need("dirichlet_alpha", self.dirichlet_alpha > 0, "must be > 0")
        need("test_fraction", 0 <= self.test_fraction < 1, "must lie in [0, 1)")
        need("sharing_ratio", 0 <= self.sharing_ratio <= 1, "must lie in [0, 1]")
        need("sharing_mode", self.sharing_mode in [m.value for m in SharingMode], "must be fresh, fixed or off")
        need("dmac_gamma", self.dmac_gamma >= 1, "must be >= 1")
        need("metric", self.metric in [m.value for m in Metric], "must be euclidean or cosine")
        need("cluster_signature", self.cluster_signature in ("params", "update"), "must be 'params' or 'update'")
        need("shape_epsilon", self.shape_epsilon >= 0, "must be >= 0")
        need("shape_tau_merge", self.shape_tau_merge is None or self.shape_tau_merge > 0, "must be > 0 or null")
        need("shape_theta_split", self.shape_theta_split is None or self.shape_theta_split >= 0, "must be >= 0 or null")
        need("shape_op_order", sorted(self.shape_op_order) == sorted(OPS), f"must be a permutation of {list(OPS)}")
        need("objective_alpha", self.objective_alpha >= 0, "must be >= 0")
        need("objective_beta", self.objective_beta >= 0, "must be >= 0")
        need("downward_mix", 0 <= self.downward_mix <= 1, "must lie in [0, 1]")

    # -- component configs --------------------------------------------------

    def model_spec(self, input_dim: int, num_classes: int) -> ModelSpec:
        return ModelSpec(input_dim, self.hidden_dims, num_classes)

    def sharing(self) -> SharingConfig:
        return SharingConfig(self.sharing_ratio, SharingMode(self.sharing_mode), self.seed)

    def dmac(self) -> DmacConfig:
        return DmacConfig(self.dmac_gamma, Metric(self.metric))

    def shape(self) -> ShapeConfig:
        return ShapeConfig(self.shape_epsilon, self.shape_tau_merge, self.shape_theta_split,
                           self.shape_op_order, Metric(self.metric))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            d[f.name] = list(value) if isinstance(value, tuple) else value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {version!r}")
        known = {f.name: f for f in dataclasses.fields(cls)}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        kwargs = {key: _coerce(key, value, known[key].default) for key, value in d.items()}
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"not valid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError("config", "top level must be an object")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(pathlib.Path(path).read_text())


def _coerce(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, "must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"must be an integer, got {value!r}")
        return value
    if isinstance(default, float) or (default is None and key.startswith("shape_")):
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"must be a number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise ConfigError(key, "must not be NaN")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(key, "must be a list")
        return tuple(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, "must be a string")
        return value
    return value
