from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ModelError

MaxFeatures = Union[str, float]

ALL_FEATURES = "all"
SQRT_FEATURES = "sqrt"
# 'auto' is the legacy spelling of "consider every feature" for regressors.
MAX_FEATURES_ALIASES = {
    "auto": ALL_FEATURES,
    ALL_FEATURES: ALL_FEATURES,
    SQRT_FEATURES: SQRT_FEATURES,
}

LEAF = -1


def parse_max_features(value: Union[str, float, int]) -> MaxFeatures:
    """Normalize a max_features token: 'all'/'auto', 'sqrt' or a fraction in (0, 1]."""

    if isinstance(value, str):
        token = value.strip().lower()
        if token in MAX_FEATURES_ALIASES:
            return MAX_FEATURES_ALIASES[token]
        try:
            value = float(token)
        except ValueError:
            raise ModelError(f"Invalid max_features: {value!r}") from None
    if isinstance(value, bool) or not 0 < float(value) <= 1:
        raise ModelError(f"max_features fraction must be in (0, 1], got {value!r}")
    return float(value)


@dataclass(frozen=True)
class ForestHyperparams:

    n_estimators: int = 22
    max_features: MaxFeatures = SQRT_FEATURES
    min_samples_split: int = 2
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "max_features", parse_max_features(self.max_features))
        if self.n_estimators < 1:
            raise ModelError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.min_samples_split < 2:
            raise ModelError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.seed < 0:
            raise ModelError(f"seed must be unsigned, got {self.seed}")

    def split_features(self, n_features: int) -> int:
        """Number of features examined at each split."""

        if self.max_features == ALL_FEATURES:
            return n_features
        if self.max_features == SQRT_FEATURES:
            return min(n_features, math.ceil(math.sqrt(n_features)))
        return max(1, min(n_features, int(float(self.max_features) * n_features)))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> ForestHyperparams:
        try:
            return cls(
                n_estimators=int(data["n_estimators"]),
                max_features=data["max_features"],
                min_samples_split=int(data["min_samples_split"]),
                bootstrap=bool(data["bootstrap"]),
                seed=int(data["seed"]),
            )
        except (KeyError, TypeError) as e:
            raise ModelError(f"Invalid hyperparameters: {e}") from None


@dataclass
class Tree:
    """A regression tree stored as parallel node arrays; node 0 is the root.

    A node is a leaf when its feature is LEAF. Internal nodes send a vector left when
    `x[feature] <= threshold`."""

    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    value: List[float] = field(default_factory=list)

    def add_node(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.value) - 1

    @property
    def node_count(self) -> int:
        return len(self.value)

    @property
    def max_feature_index(self) -> int:
        return max(self.feature, default=LEAF)

    def predict_one(self, x: Sequence[float]) -> float:
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        node = 0
        while feature[node] != LEAF:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return self.value[node]

    def predict_rows(self, X: np.ndarray[Any, Any]) -> np.ndarray[Any, Any]:
        """Predict every row of `X` at once, descending one tree level per step."""

        feature = np.asarray(self.feature, dtype=np.intp)
        threshold = np.asarray(self.threshold, dtype=np.float64)
        left = np.asarray(self.left, dtype=np.intp)
        right = np.asarray(self.right, dtype=np.intp)
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(feature[node] != LEAF)
        while active.size:
            current = node[active]
            goes_left = X[active, feature[current]] <= threshold[current]
            node[active] = np.where(goes_left, left[current], right[current])
            active = active[feature[node[active]] != LEAF]
        return np.asarray(self.value, dtype=np.float64)[node]

    def to_node(self, node: int = 0) -> Dict[str, Any]:
        """Nested {f, t, l, r} / {v} form used by the model document."""

        if self.feature[node] == LEAF:
            return {"v": self.value[node]}
        return {
            "f": self.feature[node],
            "t": self.threshold[node],
            "l": self.to_node(self.left[node]),
            "r": self.to_node(self.right[node]),
        }

    @classmethod
    def from_node(cls, root: Dict[str, Any]) -> Tree:
        tree = cls()
        stack: List[Tuple[Dict[str, Any], Optional[int], bool]] = [(root, None, False)]
        while stack:
            data, parent, is_right = stack.pop()
            if "v" in data:
                index = tree.add_node(float(data["v"]))
            else:
                index = tree.add_node(0.0)
                tree.feature[index] = int(data["f"])
                tree.threshold[index] = float(data["t"])
                stack.append((data["r"], index, True))
                stack.append((data["l"], index, False))
            if parent is not None:
                if is_right:
                    tree.right[parent] = index
                else:
                    tree.left[parent] = index
        return tree


def _best_split(
    X: np.ndarray[Any, Any], y: np.ndarray[Any, Any], features: np.ndarray[Any, Any]
) -> Optional[Tuple[int, float, float]]:
    """Find the split with the lowest summed squared error over `features`.

    Returns (feature, threshold, sse) or None when every candidate feature is constant.
    Ties go to the lowest feature index, then the lowest threshold."""

    n = X.shape[0]
    columns = X[:, features]
    order = np.argsort(columns, axis=0, kind="stable")
    xs = np.take_along_axis(columns, order, axis=0)
    ys = y[order]

    csum = np.cumsum(ys, axis=0)[:-1]
    csq = np.cumsum(ys * ys, axis=0)[:-1]
    total, total_sq = float(y.sum()), float((y * y).sum())
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    sse = (csq - csum**2 / n_left) + ((total_sq - csq) - (total - csum) ** 2 / n_right)
    sse = np.where(xs[1:] > xs[:-1], sse, np.inf)

    best: Optional[Tuple[int, float, float]] = None
    for column in np.argsort(features, kind="stable"):
        position = int(np.argmin(sse[:, column]))
        score = float(sse[position, column])
        if math.isinf(score) or (best is not None and score >= best[2]):
            continue
        low, high = float(xs[position, column]), float(xs[position + 1, column])
        threshold = (low + high) / 2.0
        if not low <= threshold < high:
            threshold = low
        best = (int(features[column]), threshold, score)
    return best


def grow_tree(
    X: np.ndarray[Any, Any], y: np.ndarray[Any, Any], hp: ForestHyperparams, rng: np.random.Generator
) -> Tree:
    """Grow one unpruned regression tree by variance reduction."""

    n_features = X.shape[1]
    k = hp.split_features(n_features)
    tree = Tree()
    stack = [(tree.add_node(0.0), np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        targets = y[rows]
        if np.ptp(targets) == 0:
            tree.value[node] = float(targets[0])
            continue
        tree.value[node] = float(targets.mean())
        if rows.size < hp.min_samples_split:
            continue

        candidates = np.sort(rng.choice(n_features, size=k, replace=False))
        split = _best_split(X[rows], targets, candidates)
        if split is None and k < n_features:
            # Every sampled feature is constant here; fall back to the remaining ones.
            rest = np.setdiff1d(np.arange(n_features), candidates)
            split = _best_split(X[rows], targets, rest)
        if split is None:
            continue

        feature, threshold, _ = split
        goes_left = X[rows, feature] <= threshold
        left, right = tree.add_node(0.0), tree.add_node(0.0)
        tree.feature[node], tree.threshold[node] = feature, threshold
        tree.left[node], tree.right[node] = left, right
        stack.append((right, rows[~goes_left]))
        stack.append((left, rows[goes_left]))
    return tree


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for tree `index`, so trees can be grown in any order."""

    return np.random.default_rng([seed, index])


def grow_forest_tree(X: np.ndarray[Any, Any], y: np.ndarray[Any, Any], hp: ForestHyperparams, index: int) -> Tree:
    rng = tree_rng(hp.seed, index)
    if hp.bootstrap:
        rows = rng.integers(0, X.shape[0], size=X.shape[0])
        return grow_tree(X[rows], y[rows], hp, rng)
    return grow_tree(X, y, hp, rng)
