"""Tree ensembles: CART base learners, random forest, and gradient boosting."""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError
from .boosting import (
    LOSSES,
    VARIANTS,
    GbdtConfig,
    GbdtModel,
    GossSample,
    fit_gbdt,
    goss_gain,
    goss_sample,
    loss_gradients,
    loss_value,
    softmax,
)
from .cart import (
    TreeNode,
    TreeParams,
    fit_tree,
    predict_tree,
    tree_depth,
    tree_from_json,
    tree_to_json,
)
from .forest import (
    ForestConfig,
    ForestDiagnostics,
    ForestModel,
    fit_random_forest,
    forest_diagnostics,
)

__all__ = [
    "LOSSES",
    "VARIANTS",
    "ForestConfig",
    "ForestDiagnostics",
    "ForestModel",
    "GbdtConfig",
    "GbdtModel",
    "GossSample",
    "TreeNode",
    "TreeParams",
    "fit_gbdt",
    "fit_random_forest",
    "fit_tree",
    "forest_diagnostics",
    "goss_gain",
    "goss_sample",
    "loss_gradients",
    "loss_value",
    "predict_ensemble",
    "predict_tree",
    "softmax",
    "tree_depth",
    "tree_from_json",
    "tree_to_json",
]


def predict_ensemble(model: ForestModel | GbdtModel, rows: np.ndarray) -> np.ndarray:
    """Per-class probabilities from a fitted ensemble.

    Forests yield vote fractions; multiclass boosting models yield the
    softmax of their accumulated scores. Regression boosting models have no
    class probabilities and are rejected.
    """
    if isinstance(model, ForestModel):
        return model.predict_proba(rows)
    if isinstance(model, GbdtModel):
        return model.predict_proba(rows)
    raise ArgumentError(f"not an ensemble model: {type(model).__name__}")
