"""Simulator for self-organising hierarchical federated learning with clustered data sharing."""

from .baselines import fedavg_trajectory, run_hypcluster
from .clustering import DmacConfig, Metric, dmac_build, incoherence, kmeans, pairwise_distance
from .config import RunConfig
from .data import Dataset, Shard, dirichlet_partition, load_idx, load_mnist, synthetic_clusters
from .metrics import MetricsReport, build_report, jain_index
from .model import ModelSpec, evaluate, forward_loss_grad, init_params, sgd_epochs
from .orchestrator import run_sofa
from .shape import ShapeConfig, shape_round
from .sharing import SharingConfig, SharingMode
from .topology import TreeTopology, validate

__version__ = "0.1.0"
