"""Dataset-to-array extraction shared by the ensemble fit functions."""

from __future__ import annotations

import numpy as np

from ..dataset import Dataset
from ..errors import DataTypeError, DegenerateDataError


def supervised_arrays(ds: Dataset, target: str, discrete: bool) -> tuple[np.ndarray, np.ndarray, tuple[str, ...], list[str]]:
    """Extract (X, y, class labels, feature names) for a supervised fit.

    Tree models consume category codes as ordinal values, so X is the raw
    code/value matrix. ``discrete`` selects classification (integer codes,
    labels from the schema) versus regression (float targets, empty labels).
    """
    col = ds.schema_of(target)
    if ds.missing_mask(target).any():
        raise DataTypeError(f"target column {target!r} has missing values")
    if discrete:
        if not col.discrete:
            raise DataTypeError(f"target column {target!r} must be categorical or binary")
        y = ds.values(target).astype(np.int64)
        labels = col.categories
    else:
        if col.kind != "numeric":
            raise DataTypeError(f"regression target {target!r} must be numeric")
        y = ds.values(target).astype(np.float64)
        labels = ()
    feature_names = [n for n in ds.feature_names if n != target]
    if not feature_names:
        raise DegenerateDataError("no feature columns available to fit on")
    return ds.matrix(feature_names), y, labels, feature_names
