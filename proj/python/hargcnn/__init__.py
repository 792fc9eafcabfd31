"""Chronological activity graphs and graph-convolution label imputation."""

from ._core import (
    HargcnnError,
    Model,
    __version__,
    compare,
    eval_hidden_count,
    gradcheck,
    max_hidden_nodes,
    metrics,
    normalized_adjacency,
    param_budget,
    param_count,
    synth_csv,
    train_eval,
)

__all__ = [
    "HargcnnError",
    "Model",
    "__version__",
    "compare",
    "eval_hidden_count",
    "gradcheck",
    "max_hidden_nodes",
    "metrics",
    "normalized_adjacency",
    "param_budget",
    "param_count",
    "synth_csv",
    "train_eval",
]
