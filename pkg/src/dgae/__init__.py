"""Disentangled (variational) graph auto-encoders.

Multi-channel graph encoding with dynamic edge-to-channel assignment,
per-channel normalizing flows, a factor-wise decoder, an independence
regularizer, and full training/evaluation pipelines for link prediction,
node clustering, and disentanglement diagnostics.
"""

from .config import ConfigError, TrainConfig, load_config, save_config
from .graphs import (
    EdgeSplit,
    Graph,
    SyntheticSpec,
    joint_labels,
    load_graph,
    save_graph,
    split_edges,
    synth_graph,
    tune_p_for_degree,
)
from .model import ModelParams, init_model, load_checkpoint, save_checkpoint
from .optim import Adam, grad_check
from .tensor import Tape, Tensor
from .training import RunHistory, train, train_dga, train_dvga

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ConfigError",
    "EdgeSplit",
    "Graph",
    "ModelParams",
    "RunHistory",
    "SyntheticSpec",
    "Tape",
    "Tensor",
    "TrainConfig",
    "grad_check",
    "init_model",
    "joint_labels",
    "load_checkpoint",
    "load_config",
    "load_graph",
    "save_checkpoint",
    "save_config",
    "save_graph",
    "split_edges",
    "synth_graph",
    "train",
    "train_dga",
    "train_dvga",
    "tune_p_for_degree",
]
