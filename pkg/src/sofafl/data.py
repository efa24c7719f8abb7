"""Datasets, client shards, IDX parsing and non-IID partitioning."""

from __future__ import annotations

import gzip
import logging
import pathlib
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .rng import stream

log = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class DataError(ValueError):
    """Malformed or missing input data."""


class SampleId(NamedTuple):
    origin_client: int
    local_index: int


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    num_classes: int = 10

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.X) != len(self.y):
            raise DataError(f"{len(self.X)} feature rows but {len(self.y)} labels")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise DataError(f"labels outside [0, {self.num_classes})")

    def __len__(self):
        return len(self.y)

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]


@dataclass
class Samples:
    """Rows of a shard, each tagged by a ``(origin_client, local_index)`` id."""

    ids: np.ndarray
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1, 2)
        if not (len(self.ids) == len(self.X) == len(self.y)):
            raise DataError("ids, features and labels differ in length")

    @classmethod
    def empty(cls, input_dim: int) -> "Samples":
        return cls(np.zeros((0, 2), np.int64), np.zeros((0, input_dim)), np.zeros(0, np.int64))

    def __len__(self):
        return len(self.y)

    def keys(self) -> np.ndarray:
        """One int64 per row, unique iff the SampleIds are."""
        return self.ids[:, 0] * (1 << 32) + self.ids[:, 1]

    def sample_ids(self) -> list[SampleId]:
        return [SampleId(int(a), int(b)) for a, b in self.ids]

    def take(self, idx) -> "Samples":
        idx = np.asarray(idx, dtype=np.int64)
        return Samples(self.ids[idx], self.X[idx], self.y[idx])

    def sorted(self) -> "Samples":
        return self.take(np.argsort(self.keys(), kind="stable"))

    def without(self, keys: np.ndarray) -> "Samples":
        return self.take(np.flatnonzero(~np.isin(self.keys(), keys)))

    @staticmethod
    def union(parts: Sequence["Samples"], input_dim: int) -> "Samples":
        """Concatenate and drop repeated ids, keeping the first occurrence."""
        parts = [p for p in parts if len(p)]
        if not parts:
            return Samples.empty(input_dim)
        merged = Samples(np.concatenate([p.ids for p in parts]),
                         np.concatenate([p.X for p in parts]),
                         np.concatenate([p.y for p in parts]))
        _, first = np.unique(merged.keys(), return_index=True)
        return merged.take(np.sort(first))


@dataclass
class Shard:
    """One client's data: its own train/test split plus samples received this round."""

    client: int
    train: Samples
    test: Samples
    received: Samples = field(default=None)

    def __post_init__(self):
        if self.received is None:
            self.received = Samples.empty(self.train.X.shape[1])

    @property
    def owned(self) -> Samples:
        return Samples.union([self.train, self.test], self.input_dim)

    @property
    def input_dim(self) -> int:
        return self.train.X.shape[1]

    def training_set(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.received) == 0:
            return self.train.X, self.train.y
        return (np.concatenate([self.train.X, self.received.X]),
                np.concatenate([self.train.y, self.received.y]))


# -- IDX ---------------------------------------------------------------------

def _open(path):
    path = pathlib.Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Parse an unsigned-byte IDX file (optionally gzipped) into a uint8 array."""
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataError(f"{path}: truncated header at byte offset {len(raw)}")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic >> 8 != 0x08 or magic & 0xFF == 0:
        raise DataError(f"{path}: bad magic number 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataError(f"{path}: truncated header at byte offset {len(raw)}, expected {header} bytes")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    expected = int(np.prod(dims))
    body = len(raw) - header
    if body != expected:
        raise DataError(f"{path}: data length mismatch at byte offset {header}: "
                        f"header promises {expected} bytes, file has {body}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise DataError("only unsigned-byte IDX files are supported")
    header = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    path = pathlib.Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as fh:
        fh.write(header + array.tobytes())


def load_idx(images_path, labels_path) -> Dataset:
    """Load an images/labels IDX pair, scaling pixels to [0, 1]."""
    for p, magic in ((images_path, IMAGES_MAGIC), (labels_path, LABELS_MAGIC)):
        with _open(p) as fh:
            head = fh.read(4)
        if len(head) < 4 or struct.unpack(">I", head)[0] != magic:
            found = struct.unpack(">I", head)[0] if len(head) == 4 else None
            raise DataError(f"{p}: bad magic number {found!r}, expected 0x{magic:08x}")
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if len(images) != len(labels):
        raise DataError(f"{len(images)} images but {len(labels)} labels")
    X = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return Dataset(X, labels.astype(np.int64), num_classes=10)


def find_mnist_files(directory, split: str = "train") -> tuple[pathlib.Path, pathlib.Path]:
    directory = pathlib.Path(directory)
    found = []
    for stem in MNIST_FILES[split]:
        for suffix in ("", ".gz"):
            candidate = directory / (stem + suffix)
            if candidate.exists():
                found.append(candidate)
                break
        else:
            raise DataError(f"{directory}: missing {stem} (or {stem}.gz)")
    return found[0], found[1]


def load_mnist(directory, subset: int | None = 4000, seed: int = 0) -> Dataset:
    """MNIST training images from ``directory``, optionally a stratified subset."""
    data = load_idx(*find_mnist_files(directory))
    if subset is not None and subset < len(data):
        data = stratified_subset(data, subset, seed)
    return data


def stratified_subset(data: Dataset, n: int, seed: int) -> Dataset:
    """Pick ``n`` rows keeping class proportions (largest-remainder rounding)."""
    rng = stream(seed, "subset")
    counts = np.bincount(data.y, minlength=data.num_classes)
    quota = counts * n / len(data)
    take = np.floor(quota).astype(int)
    short = n - take.sum()
    take[np.argsort(-(quota - take), kind="stable")[:short]] += 1
    chosen = []
    for c in range(data.num_classes):
        idx = np.flatnonzero(data.y == c)
        chosen.append(rng.choice(idx, size=take[c], replace=False))
    idx = np.sort(np.concatenate(chosen))
    return Dataset(data.X[idx], data.y[idx], data.num_classes)


# -- partitioning ------------------------------------------------------------

def _shard_from_rows(client: int, X: np.ndarray, y: np.ndarray) -> Shard:
    ids = np.column_stack([np.full(len(y), client), np.arange(len(y))])
    return Shard(client, Samples(ids, X, y), Samples.empty(X.shape[1]))


def dirichlet_partition(data: Dataset, num_clients: int, alpha: float, seed: int,
                        min_size: int = 1, max_retries: int = 100) -> list[Shard]:
    """Label-skewed split: each class is divided with Dirichlet(alpha) proportions.

    Every sample goes to exactly one client.  Draws are repeated until every
    client has ``min_size`` samples; after ``max_retries`` the smallest
    clients are topped up from the largest, one sample at a time.
    """
    if num_clients < 1:
        raise ValueError("num_clients must be at least 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if len(data) < num_clients * min_size:
        raise DataError(f"{len(data)} samples cannot cover {num_clients} clients "
                        f"with {min_size} each")
    rng = stream(seed, "partition")
    if num_clients == 1:
        return [_shard_from_rows(0, data.X, data.y)]

    by_class = [np.flatnonzero(data.y == c) for c in range(data.num_classes)]
    for _ in range(max_retries):
        buckets: list[list[int]] = [[] for _ in range(num_clients)]
        for idx in by_class:
            if len(idx) == 0:
                continue
            idx = rng.permutation(idx)
            props = rng.dirichlet(np.full(num_clients, alpha))
            cuts = (np.cumsum(props) * len(idx)).astype(int)[:-1]
            for bucket, part in zip(buckets, np.split(idx, cuts)):
                bucket.extend(part.tolist())
        if min(len(b) for b in buckets) >= min_size:
            break
    else:
        log.info("dirichlet_partition: %d retries exhausted, topping up small clients", max_retries)
        while min(len(b) for b in buckets) < min_size:
            small = min(range(num_clients), key=lambda i: (len(buckets[i]), i))
            large = max(range(num_clients), key=lambda i: (len(buckets[i]), -i))
            buckets[small].append(buckets[large].pop())

    shards = []
    for client, bucket in enumerate(buckets):
        rows = rng.permutation(np.asarray(bucket, dtype=np.int64))
        shards.append(_shard_from_rows(client, data.X[rows], data.y[rows]))
    return shards


def split_train_test(shards: Sequence[Shard], test_fraction: float, seed: int) -> list[Shard]:
    """Move a ``test_fraction`` of each client's own samples into its test split.

    Clients with at least two samples keep at least one on each side.
    """
    out = []
    for shard in shards:
        owned = shard.owned
        n = len(owned)
        n_test = int(round(test_fraction * n))
        if n >= 2:
            n_test = min(max(n_test, 1), n - 1)
        else:
            n_test = 0
        perm = stream(seed, "split", shard.client).permutation(n)
        test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        out.append(Shard(shard.client, owned.take(train_idx), owned.take(test_idx),
                         Samples.empty(owned.X.shape[1])))
    return out


# -- synthetic data ----------------------------------------------------------

@dataclass
class SyntheticTask:
    """Gaussian class means per client group; group ``g`` has means ``means[g]``."""

    means: np.ndarray  # (groups, classes, dim)
    noise: float = 1.0

    @property
    def num_classes(self) -> int:
        return self.means.shape[1]

    def sample(self, group: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        y = rng.integers(0, self.num_classes, size=n)
        X = self.means[group, y] + self.noise * rng.standard_normal((n, self.means.shape[2]))
        return X, y


def make_synthetic_task(num_clusters: int, input_dim: int, num_classes: int,
                        separation: float, seed: int, noise: float = 1.0) -> SyntheticTask:
    """Shared base class means, shifted per group by ``separation`` along random directions."""
    if separation <= 0:
        raise ValueError("separation must be positive")
    rng = stream(seed, "synthetic-task")
    base = rng.standard_normal((num_classes, input_dim)) * 2.0
    shifts = rng.standard_normal((num_clusters, num_classes, input_dim))
    shifts /= np.linalg.norm(shifts, axis=2, keepdims=True)
    return SyntheticTask(base[None] + separation * shifts, noise)


def synthetic_clusters(num_clusters: int, clients_per_cluster: int, samples_per_client: int,
                       input_dim: int, num_classes: int, separation: float, seed: int,
                       task: SyntheticTask | None = None) -> list[Shard]:
    """Client shards in well-separated groups.

    Client ``c`` belongs to group ``c // clients_per_cluster``.  The returned
    shards hold all samples in ``train``; use :func:`split_train_test` to
    carve out test data.
    """
    if task is None:
        task = make_synthetic_task(num_clusters, input_dim, num_classes, separation, seed)
    shards = []
    for client in range(num_clusters * clients_per_cluster):
        X, y = task.sample(client // clients_per_cluster, samples_per_client,
                           stream(seed, "synthetic-client", client))
        shards.append(_shard_from_rows(client, X, y))
    return shards


def synthetic_dataset(n: int, input_dim: int, num_classes: int, seed: int,
                      separation: float = 3.0) -> Dataset:
    """A single Gaussian-mixture classification set, squashed into [0, 1]."""
    task = make_synthetic_task(1, input_dim, num_classes, separation, seed)
    X, y = task.sample(0, n, stream(seed, "synthetic-dataset"))
    return Dataset(1.0 / (1.0 + np.exp(-X / 2.0)), y, num_classes)
