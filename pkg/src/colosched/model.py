from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from semver import VersionInfo as Version

from .errors import ModelError, ProfileError
from .forest import ForestHyperparams, Tree, grow_forest_tree
from .profiles import ApplicationProfile, ColocationSample, FeatureSet, pair_features

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = Version(major=1, minor=0, patch=0)


def dataset_arrays(dataset: Sequence[ColocationSample]) -> Tuple[np.ndarray[Any, Any], np.ndarray[Any, Any]]:
    if not dataset:
        raise ModelError("Empty dataset")
    width = len(dataset[0].features)
    for sample in dataset:
        if len(sample.features) != width:
            raise ModelError(
                f"Inconsistent feature lengths: {len(sample.features)} != {width} "
                f"({sample.primary_id}/{sample.interfering_id})"
            )
    X = np.array([sample.features for sample in dataset], dtype=np.float64).reshape(-1, width)
    y = np.array([sample.degradation for sample in dataset], dtype=np.float64)
    return X, y


@dataclass(frozen=True)
class DegradationModel:
    """A trained random forest predicting the degradation (%) of a primary application
    when colocated with an interfering one."""

    trees: Tuple[Tree, ...]
    hyperparams: ForestHyperparams
    feature_set: Optional[FeatureSet]
    training_target_range: Tuple[float, float]
    n_features: int

    def predict_vector(self, x: Sequence[float]) -> float:
        if len(x) != self.n_features:
            raise ModelError(f"Feature vector length {len(x)} != {self.n_features}")
        total = 0.0
        for tree in self.trees:
            total += tree.predict_one(x)
        return max(0.0, total / len(self.trees))

    def predict_rows(self, X: np.ndarray[Any, Any]) -> np.ndarray[Any, Any]:
        """Vectorized `predict_vector` over the rows of a feature matrix."""

        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(f"Feature matrix shape {X.shape} needs {self.n_features} columns")
        # Trees are summed in order so results match predict_vector bit for bit.
        total = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            total += tree.predict_rows(X)
        return np.maximum(0.0, total / len(self.trees))

    def predict_many(self, rows: Sequence[Sequence[float]]) -> List[float]:
        if not rows:
            return []
        X = np.asarray(rows, dtype=np.float64).reshape(len(rows), -1)
        return [float(value) for value in self.predict_rows(X)]

    def predict(self, primary: ApplicationProfile, interfering: ApplicationProfile) -> float:
        return predict_degradation(self, primary, interfering)

    def predict_pairs(self, jobs: Sequence[ApplicationProfile]) -> np.ndarray[Any, Any]:
        """Degradation matrix of a queue: entry (i, j) is job i colocated with job j.

        Each application's feature half is built once and every ordered pair of distinct
        positions is predicted in one pass; the diagonal stays 0."""

        if self.feature_set is None:
            raise ModelError("Model was trained without a feature set and cannot read profiles")
        halves: Dict[str, List[float]] = {}
        try:
            for job in jobs:
                if job.app_id not in halves:
                    halves[job.app_id] = job.features(self.feature_set)
        except ProfileError as e:
            raise ModelError(f"Feature set mismatch: {e}") from None

        n = len(jobs)
        matrix = np.zeros((n, n), dtype=np.float64)
        if n < 2:
            return matrix
        own = np.array([halves[job.app_id] for job in jobs], dtype=np.float64)
        primary, interfering = np.nonzero(~np.eye(n, dtype=bool))
        X = np.hstack([own[primary], own[interfering]])
        matrix[primary, interfering] = self.predict_rows(X)
        return matrix


def train_forest(
    dataset: Sequence[ColocationSample],
    hp: ForestHyperparams,
    feature_set: Optional[FeatureSet] = None,
    jobs: int = 1,
) -> DegradationModel:
    """Train a random forest on colocation samples.

    Every tree draws from its own generator derived from (seed, tree index), so growing
    trees on `jobs` worker threads yields the same forest as growing them in order."""

    X, y = dataset_arrays(dataset)
    if feature_set is not None and X.shape[1] != feature_set.n_features:
        raise ModelError(
            f"Dataset has {X.shape[1]} features, feature set {feature_set} "
            f"expects {feature_set.n_features}"
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            trees = list(
                executor.map(lambda i: grow_forest_tree(X, y, hp, i), range(hp.n_estimators))
            )
    else:
        trees = [grow_forest_tree(X, y, hp, i) for i in range(hp.n_estimators)]

    logger.debug(
        "Trained %d trees on %d samples x %d features", len(trees), X.shape[0], X.shape[1]
    )
    return DegradationModel(
        trees=tuple(trees),
        hyperparams=hp,
        feature_set=feature_set,
        training_target_range=(float(y.min()), float(y.max())),
        n_features=X.shape[1],
    )


def predict_degradation(
    model: DegradationModel, primary: ApplicationProfile, interfering: ApplicationProfile
) -> float:
    if model.feature_set is None:
        raise ModelError("Model was trained without a feature set and cannot read profiles")
    try:
        features = pair_features(primary, interfering, model.feature_set)
    except ProfileError as e:
        raise ModelError(f"Feature set mismatch: {e}") from None
    return model.predict_vector(features)


def model_document(model: DegradationModel) -> Dict[str, Any]:
    return {
        "version": str(MODEL_FORMAT_VERSION),
        "feature_set": str(model.feature_set) if model.feature_set else None,
        "n_features": model.n_features,
        "hyperparams": model.hyperparams.to_dict(),
        "training_target_range": list(model.training_target_range),
        "trees": [tree.to_node() for tree in model.trees],
    }


def save_model(model: DegradationModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(model_document(model)) + "\n", encoding="utf-8")


def load_model(path: Union[str, Path]) -> DegradationModel:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ModelError(f"Model file not found: {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelError(f"{path}: corrupt model file: {e}") from None

    try:
        version = Version.parse(document["version"])
    except (KeyError, TypeError, ValueError):
        raise ModelError(f"{path}: corrupt model file: missing or invalid version") from None
    if version.major != MODEL_FORMAT_VERSION.major or version > MODEL_FORMAT_VERSION:
        raise ModelError(
            f"{path}: model format version mismatch: {version} (supported {MODEL_FORMAT_VERSION})"
        )

    try:
        hyperparams = ForestHyperparams.from_dict(document["hyperparams"])
        feature_set = document["feature_set"]
        declared = FeatureSet.parse(feature_set) if feature_set else None
        lo, hi = document["training_target_range"]
        trees = tuple(Tree.from_node(root) for root in document["trees"])
        n_features = int(document["n_features"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"{path}: corrupt model file: {e}") from None

    if len(trees) != hyperparams.n_estimators:
        raise ModelError(
            f"{path}: corrupt model file: {len(trees)} trees, expected {hyperparams.n_estimators}"
        )
    if any(tree.max_feature_index >= n_features for tree in trees):
        raise ModelError(f"{path}: corrupt model file: feature index out of range")

    return DegradationModel(
        trees=trees,
        hyperparams=hyperparams,
        feature_set=declared,
        training_target_range=(float(lo), float(hi)),
        n_features=n_features,
    )
