"""Gradient-boosted regression trees: plain, GOSS-sampled, and oblivious variants.

Each round fits one regression tree per class to the pseudo-residuals
r = -dL/df (squared loss: y - f; multiclass log-loss: onehot - softmax(f)),
then replaces every leaf value with a one-step Newton update

    leaf = learning_rate * sum(residuals) / sum(hessians)

computed over the full training data routed to that leaf (the step size is
absorbed into the stored leaf values). The GOSS variant draws one gradient-
magnitude-based row sample per round and searches tree structure on it,
weighting the random remainder's gradients (and any hessian aggregates) by
(1 - a) / b; the oblivious variant constrains every tree level to a single
shared (feature, threshold) test chosen to maximize the gain summed across
that level's nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset
from ..errors import ArgumentError, ConvergenceError
from ._data import supervised_arrays
from .cart import GAIN_EPS, TreeNode, TreeParams, fit_tree, predict_tree, tree_from_json, tree_to_json

LOSSES = ("squared", "multiclass_logloss")
VARIANTS = ("plain", "goss", "oblivious")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted for overflow safety; tolerates -inf entries."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class GbdtConfig:
    """Boosting hyperparameters.

    Args:
        loss: "squared" (regression) or "multiclass_logloss" (classification).
        rounds: boosting iterations N; 0 is legal and leaves only the
            constant initial score.
        learning_rate: shrinkage in (0, 1] applied to every leaf value.
        max_depth: per-tree depth limit.
        min_samples_leaf: smallest leaf size for plain/goss structure search.
        variant: "plain", "goss", or "oblivious".
        a: GOSS top-gradient fraction in (0, 1].
        b: GOSS remainder sampling fraction in [0, 1].
        seed: master seed for the per-round GOSS draws.
    """

    loss: str = "multiclass_logloss"
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1
    variant: str = "plain"
    a: float = 0.2
    b: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.loss not in LOSSES:
            raise ArgumentError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.variant not in VARIANTS:
            raise ArgumentError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.rounds < 0:
            raise ArgumentError("rounds must be >= 0")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ArgumentError("learning rate must be in (0, 1]")
        if self.max_depth < 0:
            raise ArgumentError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ArgumentError("min_samples_leaf must be >= 1")
        if not (0.0 < self.a <= 1.0):
            raise ArgumentError("GOSS fraction a must be in (0, 1]")
        if not (0.0 <= self.b <= 1.0):
            raise ArgumentError("GOSS fraction b must be in [0, 1]")

    def to_json(self) -> dict:
        return {
            "loss": self.loss,
            "rounds": self.rounds,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "variant": self.variant,
            "a": self.a,
            "b": self.b,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(doc: dict) -> "GbdtConfig":
        return GbdtConfig(
            loss=str(doc["loss"]),
            rounds=int(doc["rounds"]),
            learning_rate=float(doc["learning_rate"]),
            max_depth=int(doc["max_depth"]),
            min_samples_leaf=int(doc.get("min_samples_leaf", 1)),
            variant=str(doc["variant"]),
            a=float(doc.get("a", 0.2)),
            b=float(doc.get("b", 0.1)),
            seed=int(doc.get("seed", 0)),
        )


# -- GOSS sampling -------------------------------------------------------------------


@dataclass(frozen=True)
class GossSample:
    """One-side sample: kept top-gradient rows, random remainder rows, remainder weight."""

    top_idx: np.ndarray
    rand_idx: np.ndarray
    weight: float

    def __post_init__(self) -> None:
        top = np.asarray(self.top_idx, dtype=np.int64)
        rand = np.asarray(self.rand_idx, dtype=np.int64)
        top.setflags(write=False)
        rand.setflags(write=False)
        object.__setattr__(self, "top_idx", top)
        object.__setattr__(self, "rand_idx", rand)

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([self.top_idx, self.rand_idx])

    @property
    def row_weights(self) -> np.ndarray:
        """Amplification per sampled row: 1 for the kept set, (1-a)/b for the sampled rest."""
        return np.concatenate([
            np.ones(self.top_idx.size),
            np.full(self.rand_idx.size, self.weight),
        ])


def _ceil_count(x: float) -> int:
    # ceil with a guard against 0.2 * 10 style float fuzz landing above the integer
    return int(math.ceil(x - 1e-9))


def goss_sample(gradients: np.ndarray, a: float, b: float, seed: int) -> GossSample:
    """Split rows into the top-gradient set A and a weighted random remainder B.

    A holds the ceil(a*n) rows of largest |gradient| (ties by row index
    ascending); B holds ceil(b*|rest|) rows drawn uniformly without
    replacement from the rest, carrying weight (1-a)/b. b=0 yields an empty
    B with weight 0.
    """
    g = np.asarray(gradients, dtype=np.float64).reshape(-1)
    if g.size == 0:
        raise ArgumentError("cannot sample from zero rows")
    if not np.isfinite(g).all():
        raise ArgumentError("gradient magnitudes must be finite")
    if not (0.0 < a <= 1.0):
        raise ArgumentError("GOSS fraction a must be in (0, 1]")
    if not (0.0 <= b <= 1.0):
        raise ArgumentError("GOSS fraction b must be in [0, 1]")
    n = g.size
    order = np.argsort(-np.abs(g), kind="stable")
    n_top = min(n, _ceil_count(a * n))
    top = np.sort(order[:n_top])
    rest = order[n_top:]
    n_rand = _ceil_count(b * rest.size) if (b > 0.0 and rest.size) else 0
    if n_rand:
        rng = np.random.default_rng(seed)
        rand = np.sort(rng.choice(rest, size=n_rand, replace=False))
    else:
        rand = np.empty(0, dtype=np.int64)
    weight = 0.0 if b == 0.0 else (1.0 - a) / b
    return GossSample(top_idx=top, rand_idx=rand, weight=weight)


def goss_gain(feature_values: np.ndarray, gradients: np.ndarray, d: float, sample: GossSample) -> float:
    """Estimated variance gain of splitting the sampled rows at value <= d.

    Left and right terms combine the kept set's gradient sums with the
    (1-a)/b-amplified remainder sums, square them, and divide by the side's
    raw sampled row count; the total is scaled by 1 over the sampled row
    count. An empty side contributes 0.
    """
    v = np.asarray(feature_values, dtype=np.float64).reshape(-1)
    g = np.asarray(gradients, dtype=np.float64).reshape(-1)
    if v.shape != g.shape:
        raise ArgumentError("feature values and gradients differ in length")
    idx = sample.indices
    if idx.size == 0:
        raise ArgumentError("sample is empty")
    if idx.max() >= v.size or idx.min() < 0:
        raise ArgumentError("sample indices fall outside the data")
    w = sample.row_weights
    left = v[idx] <= d
    n = idx.size
    wg = w * g[idx]
    total = 0.0
    for side in (left, ~left):
        count = int(side.sum())
        if count == 0:
            continue
        s = float(wg[side].sum())
        total += s * s / count
    return total / n


# -- model ---------------------------------------------------------------------------


@dataclass
class GbdtModel:
    """Fitted boosting ensemble: constant initial scores plus per-round class trees.

    Stored leaf values already include the learning-rate scaling, so raw
    scores are f0 plus a plain sum over trees. ``class_labels`` is empty for
    squared-loss (regression) models.
    """

    feature_names: tuple[str, ...]
    class_labels: tuple[str, ...]
    f0: np.ndarray
    trees: list[list[TreeNode]]
    loss_history: tuple[float, ...]
    config: GbdtConfig = field(default_factory=GbdtConfig)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise ArgumentError(f"expected {len(self.feature_names)} feature columns, got {X.shape[1]}")
        return X

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        """Accumulated additive scores, shape (n, classes) (classes = 1 for regression)."""
        X = self._check(X)
        out = np.tile(self.f0, (X.shape[0], 1))
        for round_trees in self.trees:
            for c, root in enumerate(round_trees):
                out[:, c] += predict_tree(root, X)
        return out

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        """Regression predictions; only defined for the squared loss."""
        if self.config.loss != "squared":
            raise ArgumentError("predict_value applies to squared-loss models only")
        return self.raw_scores(X)[:, 0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.config.loss != "multiclass_logloss":
            raise ArgumentError("class probabilities require the multiclass_logloss model")
        return softmax(self.raw_scores(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_json(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "class_labels": list(self.class_labels),
            "f0": list(self.f0),
            "trees": [[tree_to_json(t) for t in level] for level in self.trees],
            "loss_history": list(self.loss_history),
            "config": self.config.to_json(),
        }

    @staticmethod
    def from_json(doc: dict) -> "GbdtModel":
        return GbdtModel(
            feature_names=tuple(doc["feature_names"]),
            class_labels=tuple(doc["class_labels"]),
            f0=np.asarray(doc["f0"], dtype=np.float64),
            trees=[[tree_from_json(t) for t in level] for level in doc["trees"]],
            loss_history=tuple(float(v) for v in doc["loss_history"]),
            config=GbdtConfig.from_json(doc["config"]),
        )


# -- structure search ----------------------------------------------------------------


def _refit_leaves(root: TreeNode, X: np.ndarray, g: np.ndarray, h: np.ndarray, lr: float) -> None:
    """Replace leaf values with learning-rate-scaled Newton steps over the full data.

    Leaves no full-data row reaches (possible for oblivious cells) score 0,
    as does a leaf whose hessian mass vanishes.
    """

    def route(node: TreeNode, rows: np.ndarray) -> None:
        if node.is_leaf:
            if rows.size == 0:
                node.value = 0.0
                return
            h_sum = float(h[rows].sum())
            node.value = 0.0 if h_sum <= 1e-12 else lr * float(g[rows].sum()) / h_sum
            return
        go_left = X[rows, node.feature] <= node.threshold
        route(node.left, rows[go_left])
        route(node.right, rows[~go_left])

    route(root, np.arange(X.shape[0]))


def _fit_goss_structure(X: np.ndarray, g: np.ndarray, w: np.ndarray, config: GbdtConfig) -> TreeNode:
    """Grow a tree on the sampled rows scoring splits by the estimated variance gain.

    The gain form matches goss_gain: amplified gradient sums squared over
    raw sampled row counts. Leaf values are placeholders; the caller refits
    them on the full data.
    """
    wg = w * g
    d = X.shape[1]
    msl = config.min_samples_leaf

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        if depth >= config.max_depth or rows.size < 2 * msl or rows.size < 2:
            return TreeNode(value=0.0)
        n = rows.size
        tot = float(wg[rows].sum())
        parent = tot * tot / n
        best: tuple[float, int, float] | None = None
        for f in range(d):
            v = X[rows, f]
            order = np.argsort(v, kind="stable")
            vs = v[order]
            cuts = np.flatnonzero(vs[:-1] < vs[1:])
            if cuts.size == 0:
                continue
            n_l = (cuts + 1).astype(np.float64)
            n_r = n - n_l
            valid = (n_l >= msl) & (n_r >= msl)
            if not valid.any():
                continue
            c1 = np.cumsum(wg[rows][order])[cuts]
            gains = np.where(valid, c1 * c1 / n_l + (tot - c1) ** 2 / n_r - parent, -np.inf)
            i = int(np.argmax(gains))
            if best is None or gains[i] > best[0]:
                best = (float(gains[i]), f, float((vs[cuts[i]] + vs[cuts[i] + 1]) / 2.0))
        if best is None or best[0] <= GAIN_EPS:
            return TreeNode(value=0.0)
        _, f, t = best
        go_left = X[rows, f] <= t
        return TreeNode(feature=f, threshold=t, left=grow(rows[go_left], depth + 1), right=grow(rows[~go_left], depth + 1))

    return grow(np.arange(X.shape[0]), 0)


def _fit_oblivious_structure(X: np.ndarray, g: np.ndarray, config: GbdtConfig) -> TreeNode:
    """Choose one shared (feature, threshold) per level maximizing the summed gain.

    Candidates are the union over the level's nodes of midpoints between
    adjacent distinct feature values; a node the threshold does not split
    contributes its unsplit score, so it neither helps nor hurts. Levels
    stop early when no candidate improves the total.
    """
    n = X.shape[0]
    d = X.shape[1]
    cells: list[np.ndarray] = [np.arange(n)]
    levels: list[tuple[int, float]] = []

    for _ in range(config.max_depth):
        live = [c for c in cells if c.size > 0]
        parent = 0.0
        for cell in live:
            s = float(g[cell].sum())
            parent += s * s / cell.size
        best: tuple[float, int, float] | None = None
        for f in range(d):
            mids: list[np.ndarray] = []
            for cell in live:
                uniq = np.unique(X[cell, f])
                if uniq.size >= 2:
                    mids.append((uniq[:-1] + uniq[1:]) / 2.0)
            if not mids:
                continue
            candidates = np.unique(np.concatenate(mids))
            score = np.zeros(candidates.size)
            for cell in live:
                v = X[cell, f]
                order = np.argsort(v, kind="stable")
                vs = v[order]
                prefix = np.concatenate([[0.0], np.cumsum(g[cell][order])])
                tot = prefix[-1]
                pos = np.searchsorted(vs, candidates, side="right")
                sum_l = prefix[pos]
                n_l = pos.astype(np.float64)
                n_r = cell.size - n_l
                with np.errstate(divide="ignore", invalid="ignore"):
                    term_l = np.where(n_l > 0, sum_l**2 / n_l, 0.0)
                    term_r = np.where(n_r > 0, (tot - sum_l) ** 2 / n_r, 0.0)
                score += term_l + term_r
            i = int(np.argmax(score))
            if best is None or score[i] > best[0]:
                best = (float(score[i]), f, float(candidates[i]))
        if best is None or best[0] - parent <= GAIN_EPS:
            break
        _, f, t = best
        levels.append((f, t))
        next_cells: list[np.ndarray] = []
        for cell in cells:
            go_left = X[cell, f] <= t
            next_cells.append(cell[go_left])
            next_cells.append(cell[~go_left])
        cells = next_cells

    def build(level: int) -> TreeNode:
        if level == len(levels):
            return TreeNode(value=0.0)
        f, t = levels[level]
        return TreeNode(feature=f, threshold=t, left=build(level + 1), right=build(level + 1))

    return build(0)


# -- fitting -------------------------------------------------------------------------


def loss_value(loss: str, y: np.ndarray, F: np.ndarray) -> float:
    """Mean training loss of score matrix F against targets y.

    Squared loss reads column 0 of F against real-valued y; multiclass
    log-loss reads one score column per class against integer class codes.
    """
    if loss not in LOSSES:
        raise ArgumentError(f"loss must be one of {list(LOSSES)}, got {loss!r}")
    if loss == "squared":
        diff = y - F[:, 0]
        return float(np.mean(0.5 * diff * diff))
    # multiclass log-loss: mean over rows of logsumexp(F) - F[true]
    m = F.max(axis=1)
    lse = m + np.log(np.exp(F - m[:, None]).sum(axis=1))
    return float(np.mean(lse - F[np.arange(F.shape[0]), y]))


def loss_gradients(loss: str, y: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-residuals (negative loss gradients) and hessian diagonals.

    Both come back with one column per score column of F. Squared loss
    yields y - F and unit hessians; multiclass log-loss yields one-hot(y)
    minus the softmax probabilities and p(1 - p).
    """
    if loss not in LOSSES:
        raise ArgumentError(f"loss must be one of {list(LOSSES)}, got {loss!r}")
    if loss == "squared":
        residuals = (y - F[:, 0])[:, None]
        hessians = np.ones((F.shape[0], 1))
    else:
        onehot = np.zeros_like(F)
        onehot[np.arange(F.shape[0]), y] = 1.0
        P = softmax(F)
        residuals = onehot - P
        hessians = P * (1.0 - P)
    return residuals, hessians


def fit_gbdt(ds: Dataset, target: str, config: GbdtConfig = GbdtConfig()) -> GbdtModel:
    """Boost regression trees against the configured loss.

    The initial score minimizes the loss over constants (squared: the target
    mean; log-loss: per-class log priors, so zero rounds predict the training
    class distribution). loss_history holds the training loss before any
    round and after each one, so it has rounds + 1 entries.
    """
    discrete = config.loss == "multiclass_logloss"
    X, y, labels, feature_names = supervised_arrays(ds, target, discrete=discrete)
    n = X.shape[0]
    if discrete:
        k = len(labels)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y] = 1.0
        priors = onehot.mean(axis=0)
        with np.errstate(divide="ignore"):
            f0 = np.log(priors)
    else:
        k = 1
        f0 = np.array([float(y.mean())])

    F = np.tile(f0, (n, 1))
    history = [loss_value(config.loss, y, F)]
    trees: list[list[TreeNode]] = []
    master = np.random.default_rng(config.seed)

    for round_no in range(config.rounds):
        residuals, hessians = loss_gradients(config.loss, y, F)
        if not np.isfinite(residuals).all():
            raise ConvergenceError(f"non-finite pseudo-residuals at round {round_no}")

        if config.variant == "goss":
            magnitude = np.sqrt((residuals * residuals).sum(axis=1))
            sample = goss_sample(magnitude, config.a, config.b, seed=int(master.integers(2**32)))
            idx = sample.indices
            weights = sample.row_weights
            X_sub = X[idx]

        round_trees: list[TreeNode] = []
        for c in range(k):
            g = residuals[:, c]
            if config.variant == "plain":
                params = TreeParams(
                    criterion="variance",
                    max_depth=config.max_depth,
                    min_samples_leaf=config.min_samples_leaf,
                )
                root = fit_tree(X, g, params)
            elif config.variant == "goss":
                root = _fit_goss_structure(X_sub, g[idx], weights, config)
            else:
                root = _fit_oblivious_structure(X, g, config)
            _refit_leaves(root, X, g, hessians[:, c], config.learning_rate)
            round_trees.append(root)
            F[:, c] += predict_tree(root, X)
        trees.append(round_trees)
        history.append(loss_value(config.loss, y, F))

    return GbdtModel(
        feature_names=tuple(feature_names),
        class_labels=labels,
        f0=f0,
        trees=trees,
        loss_history=tuple(history),
        config=config,
    )
