"""Zero-shot recognition with dual visual-semantic mapping paths.

Thin wrapper over the C++ core. Matrices follow the column convention of the
C++ API: features are d x n, embeddings p x c.
"""

import json as _json

from . import _dmap
from ._dmap import (
    Error,
    IoError,
    Model,
    NumericalError,
    ValidationError,
    consistency,
    evaluate,
    extract_relationship,
    knn_prototype,
    label_matrix,
    load_matrix,
    predict_semantic,
    preinspect,
    run_cli,
    save_matrix,
    solve_ridge_map,
)

__all__ = [
    "Error",
    "IoError",
    "Model",
    "NumericalError",
    "ValidationError",
    "consistency",
    "evaluate",
    "extract_relationship",
    "generate",
    "knn_prototype",
    "label_matrix",
    "load_matrix",
    "predict_semantic",
    "preinspect",
    "run_cli",
    "save_matrix",
    "solve_ridge_map",
    "train",
]


def generate(**config):
    """Synthetic dataset; keyword arguments are SynthConfig fields."""
    return _dmap.generate(_json.dumps(config))


def train(features, labels, seen, unseen, embeddings, class_ids, **config):
    """Trains a model; keyword arguments are run-config keys (m, gamma, eta, ...)."""
    return Model.train(features, list(labels), list(seen), list(unseen), embeddings, list(class_ids),
                       _json.dumps(config))
