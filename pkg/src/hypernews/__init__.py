"""Fake-news detection on user-news hypergraphs.

News items are hyperedges over the users who engaged with them. A two-layer
hypergraph convolution encodes users, a mean-pool over each item's
participants summarizes them, and a classifier reads that summary next to a
text embedding of the item. A symmetric contrastive term aligns the two views.
"""

from .data import DatasetManifest, SyntheticConfig, generate_synthetic, load_dataset, time_window
from .errors import ConfigError, DataError, HyperNewsError, NumericError
from .hypergraph import Hypergraph, PropagationOperator, propagation_operator
from .metrics import compute_metrics, paired_t_test
from .model import MODES, ModelParams, forward, load_checkpoint, save_checkpoint
from .textembed import EmbedderConfig, edge_features
from .training import TrainConfig, kfold_cv, split_edges, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DatasetManifest", "EmbedderConfig", "HyperNewsError",
    "Hypergraph", "MODES", "ModelParams", "NumericError", "PropagationOperator",
    "SyntheticConfig", "TrainConfig", "compute_metrics", "edge_features", "forward",
    "generate_synthetic", "kfold_cv", "load_checkpoint", "load_dataset", "paired_t_test",
    "propagation_operator", "save_checkpoint", "split_edges", "time_window", "train",
]
