"""Random forest of CART trees plus margin/strength/correlation diagnostics.

Each tree trains on a bootstrap resample with a per-split feature subsample
and casts one vote (its leaf's plurality class) per row; the forest predicts
the vote-fraction argmax. Diagnostics summarize the ensemble by the margin

    mg(x, y) = votes_for(y)/B - max_{j != y} votes_for(j)/B

its mean s (strength), the mean pairwise correlation rho_bar of per-tree raw
margins, and the generalization bound rho_bar * (1 - s^2) / s^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import Dataset
from ..errors import ArgumentError, DataTypeError, DegenerateDataError
from ._data import supervised_arrays
from .cart import TreeNode, TreeParams, fit_tree, predict_tree, tree_from_json, tree_to_json


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble shape and sampling settings.

    Args:
        trees: ensemble size B.
        mtry: features sampled per split; None = floor(sqrt(d)), at least 1.
        max_depth: per-tree depth limit; None = unlimited.
        min_samples_leaf: smallest row count per leaf.
        bootstrap: draw n rows with replacement per tree; False trains every
            tree on the full sample (useful to reduce to a single CART).
        seed: master seed; per-tree seeds derive from it.
    """

    trees: int = 100
    mtry: int | None = None
    max_depth: int | None = None
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.trees < 1:
            raise ArgumentError("forest needs at least 1 tree")
        if self.mtry is not None and self.mtry < 1:
            raise ArgumentError("mtry must be >= 1 or None")
        if self.min_samples_leaf < 1:
            raise ArgumentError("min_samples_leaf must be >= 1")

    def to_json(self) -> dict:
        return {
            "trees": self.trees,
            "mtry": self.mtry,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(doc: dict) -> "ForestConfig":
        return ForestConfig(
            trees=int(doc["trees"]),
            mtry=None if doc.get("mtry") is None else int(doc["mtry"]),
            max_depth=None if doc.get("max_depth") is None else int(doc["max_depth"]),
            min_samples_leaf=int(doc.get("min_samples_leaf", 1)),
            bootstrap=bool(doc.get("bootstrap", True)),
            seed=int(doc.get("seed", 0)),
        )


@dataclass
class ForestModel:
    """Fitted ensemble: classification trees plus the labels they vote over."""

    feature_names: tuple[str, ...]
    class_labels: tuple[str, ...]
    trees: list[TreeNode]
    tree_seeds: tuple[int, ...]
    config: ForestConfig = field(default_factory=ForestConfig)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise ArgumentError(f"expected {len(self.feature_names)} feature columns, got {X.shape[1]}")
        return X

    def tree_votes(self, X: np.ndarray) -> np.ndarray:
        """Per-tree predicted class codes, shape (B, n); vote ties go to the lowest code."""
        X = self._check(X)
        votes = np.empty((len(self.trees), X.shape[0]), dtype=np.int64)
        for t, root in enumerate(self.trees):
            votes[t] = np.argmax(predict_tree(root, X), axis=1)
        return votes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Vote fractions per class; rows sum to 1."""
        votes = self.tree_votes(X)
        n = votes.shape[1]
        out = np.zeros((n, len(self.class_labels)))
        rows = np.arange(n)
        for t in range(votes.shape[0]):
            out[rows, votes[t]] += 1.0
        return out / votes.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_json(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "class_labels": list(self.class_labels),
            "trees": [tree_to_json(t) for t in self.trees],
            "tree_seeds": list(self.tree_seeds),
            "config": self.config.to_json(),
        }

    @staticmethod
    def from_json(doc: dict) -> "ForestModel":
        return ForestModel(
            feature_names=tuple(doc["feature_names"]),
            class_labels=tuple(doc["class_labels"]),
            trees=[tree_from_json(t) for t in doc["trees"]],
            tree_seeds=tuple(int(s) for s in doc["tree_seeds"]),
            config=ForestConfig.from_json(doc["config"]),
        )


def fit_random_forest(ds: Dataset, target: str, config: ForestConfig = ForestConfig()) -> ForestModel:
    """Train B bootstrap trees; deterministic for fixed (data, config)."""
    X, y, labels, feature_names = supervised_arrays(ds, target, discrete=True)
    k = len(labels)
    d = X.shape[1]
    mtry = config.mtry if config.mtry is not None else max(1, int(math.sqrt(d)))
    master = np.random.default_rng(config.seed)
    trees: list[TreeNode] = []
    seeds: list[int] = []
    for _ in range(config.trees):
        tree_seed = int(master.integers(2**32))
        seeds.append(tree_seed)
        tree_rng = np.random.default_rng(tree_seed)
        if config.bootstrap:
            rows = tree_rng.integers(0, X.shape[0], size=X.shape[0])
        else:
            rows = np.arange(X.shape[0])
        params = TreeParams(
            criterion="gini",
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            mtry=mtry,
            seed=int(tree_rng.integers(2**32)),
            n_classes=k,
        )
        trees.append(fit_tree(X[rows], y[rows], params))
    return ForestModel(
        feature_names=tuple(feature_names),
        class_labels=labels,
        trees=trees,
        tree_seeds=tuple(seeds),
        config=config,
    )


@dataclass(frozen=True)
class ForestDiagnostics:
    """Margin distribution and the strength/correlation generalization bound.

    ``bound`` is rho_bar * (1 - s^2) / s^2 for strength s > 0 and +inf
    otherwise (the bound is vacuous at non-positive strength).
    """

    margins: np.ndarray
    strength: float
    rho_bar: float
    bound: float

    def to_csv(self, path: str | Path) -> None:
        """Per-row margins followed by the three summary values."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row_id", "margin"])
            for i, m in enumerate(self.margins):
                writer.writerow([i, repr(float(m))])
            writer.writerow(["s", repr(self.strength)])
            writer.writerow(["rho_bar", repr(self.rho_bar)])
            writer.writerow(["bound", "inf" if math.isinf(self.bound) else repr(self.bound)])


def forest_diagnostics(forest: ForestModel, data: Dataset, target: str) -> ForestDiagnostics:
    """Margins, strength, raw-margin correlation, and the error bound on labeled data.

    Per row: margin = vote fraction of the true class minus the largest
    wrong-class vote fraction; the per-tree raw margin is I(vote = truth) -
    I(vote = most-voted wrong class). rho_bar averages Pearson correlation
    over all tree pairs; a pair where either raw-margin vector is constant
    correlates 1 if the vectors are identical and 0 otherwise.
    """
    if len(forest.trees) < 2:
        raise DegenerateDataError("raw-margin correlation needs at least 2 trees")
    col = data.schema_of(target)
    if not col.discrete:
        raise DataTypeError(f"target column {target!r} must be categorical or binary")
    if data.missing_mask(target).any():
        raise DataTypeError(f"target column {target!r} has missing values")
    X = data.matrix(forest.feature_names)
    y = data.values(target).astype(np.int64)

    votes = forest.tree_votes(X)
    n_trees, n = votes.shape
    k = len(forest.class_labels)
    fractions = np.zeros((n, k))
    rows = np.arange(n)
    for t in range(n_trees):
        fractions[rows, votes[t]] += 1.0
    fractions /= n_trees

    true_frac = fractions[rows, y]
    wrong = np.array(fractions, copy=True)
    wrong[rows, y] = -1.0
    j_hat = np.argmax(wrong, axis=1)
    margins = true_frac - wrong[rows, j_hat]

    raw = (votes == y[None, :]).astype(np.float64) - (votes == j_hat[None, :]).astype(np.float64)
    centered = raw - raw.mean(axis=1, keepdims=True)
    sd = np.sqrt((centered * centered).mean(axis=1))
    cov = (centered @ centered.T) / n

    total = 0.0
    pairs = 0
    for u in range(n_trees):
        for v in range(u + 1, n_trees):
            if sd[u] == 0.0 or sd[v] == 0.0:
                corr = 1.0 if np.array_equal(raw[u], raw[v]) else 0.0
            else:
                corr = float(cov[u, v] / (sd[u] * sd[v]))
            total += corr
            pairs += 1
    rho_bar = total / pairs

    s = float(margins.mean())
    bound = math.inf if s <= 0 else rho_bar * (1.0 - s * s) / (s * s)
    margins.setflags(write=False)
    return ForestDiagnostics(margins=margins, strength=s, rho_bar=rho_bar, bound=float(bound))
