from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from .errors import ModelError
from .forest import ForestHyperparams, MaxFeatures
from .model import DegradationModel, dataset_arrays, train_forest
from .profiles import (
    ApplicationProfile,
    ColocationMeasurement,
    ColocationSample,
    CounterGroup,
    FeatureSet,
    StatMode,
    build_training_dataset,
)

logger = logging.getLogger(__name__)

RIDGE = 1e-8

T = TypeVar("T")


@dataclass(frozen=True)
class EvaluationReport:
    """Accuracy of a model on held-out samples.

    `r2` is computed over `predictions` (actual, predicted) as a whole; for
    cross-validation `per_fold_r2` holds each fold's own score (NaN when a fold's actual
    values have no variance)."""

    r2: float
    per_fold_r2: Tuple[float, ...]
    n_train: int
    n_test: int
    predictions: Tuple[Tuple[float, float], ...] = field(repr=False)

    @property
    def mean_fold_r2(self) -> float:
        scores = [score for score in self.per_fold_r2 if not math.isnan(score)]
        if not scores:
            return self.r2
        return float(np.mean(scores))


def r2_score(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Coefficient of determination: 1 - residual sum of squares / total sum of squares."""

    if len(actual) != len(predicted):
        raise ModelError(f"Length mismatch: {len(actual)} actual, {len(predicted)} predicted")
    if len(actual) == 0:
        raise ModelError("Cannot score an empty sample")
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    total = float(((a - a.mean()) ** 2).sum())
    if total == 0:
        raise ModelError("R2 is undefined when actual values have zero variance")
    return 1.0 - float(((a - p) ** 2).sum()) / total


def holdout_split(
    dataset: Sequence[T], test_fraction: float, seed: int
) -> Tuple[List[T], List[T]]:
    """Seeded uniform random partition into (train, test)."""

    if not 0 < test_fraction < 1:
        raise ModelError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = int(math.floor(test_fraction * n + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    test_rows = set(order[:n_test].tolist())
    train = [item for i, item in enumerate(dataset) if i not in test_rows]
    test = [item for i, item in enumerate(dataset) if i in test_rows]
    return train, test


def kfold_indices(n: int, k: int, seed: int) -> List[np.ndarray[Any, Any]]:
    if k < 2 or n < k:
        raise ModelError(f"k must satisfy 2 <= k <= n, got k={k}, n={n}")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(order, k)]


def evaluate(
    model: DegradationModel, test: Sequence[ColocationSample], n_train: int
) -> EvaluationReport:
    X, y = dataset_arrays(test)
    predicted = model.predict_many(X.tolist())
    actual = y.tolist()
    return EvaluationReport(
        r2=r2_score(actual, predicted),
        per_fold_r2=(),
        n_train=n_train,
        n_test=len(test),
        predictions=tuple(zip(actual, predicted)),
    )


def holdout_evaluate(
    dataset: Sequence[ColocationSample],
    hp: ForestHyperparams,
    test_fraction: float = 0.3,
    feature_set: Optional[FeatureSet] = None,
    jobs: int = 1,
) -> Tuple[DegradationModel, EvaluationReport]:
    """Train on a seeded holdout split and score the held-out part."""

    train, test = holdout_split(dataset, test_fraction, hp.seed)
    model = train_forest(train, hp, feature_set, jobs)
    return model, evaluate(model, test, len(train))


def cross_validate(
    dataset: Sequence[ColocationSample], k: int, hp: ForestHyperparams, jobs: int = 1
) -> EvaluationReport:
    """k-fold cross-validation; folds are a seeded shuffle split into near-equal parts."""

    folds = kfold_indices(len(dataset), k, hp.seed)
    actual: List[float] = []
    predicted: List[float] = []
    scores = []
    for fold in folds:
        held = set(fold.tolist())
        train = [sample for i, sample in enumerate(dataset) if i not in held]
        test = [dataset[i] for i in fold]
        model = train_forest(train, hp, jobs=jobs)
        fold_actual = [sample.degradation for sample in test]
        fold_predicted = model.predict_many([sample.features for sample in test])
        try:
            scores.append(r2_score(fold_actual, fold_predicted))
        except ModelError:
            scores.append(math.nan)
        actual.extend(fold_actual)
        predicted.extend(fold_predicted)

    return EvaluationReport(
        r2=r2_score(actual, predicted),
        per_fold_r2=tuple(scores),
        n_train=len(dataset) - max(len(fold) for fold in folds),
        n_test=max(len(fold) for fold in folds),
        predictions=tuple(zip(actual, predicted)),
    )


@dataclass(frozen=True)
class SearchSpace:
    """Candidate values for each tuned forest hyperparameter."""

    n_estimators: Sequence[int] = tuple(range(1, 31))
    max_features: Sequence[MaxFeatures] = ("all", "sqrt", 0.5)
    min_samples_split: Sequence[int] = tuple(range(2, 11))
    bootstrap: Sequence[bool] = (True, False)

    def is_empty(self) -> bool:
        return not (
            self.n_estimators and self.max_features and self.min_samples_split and self.bootstrap
        )

    def sample(self, rng: np.random.Generator, seed: int) -> ForestHyperparams:
        def pick(values: Sequence[T]) -> T:
            return values[int(rng.integers(len(values)))]

        return ForestHyperparams(
            n_estimators=pick(self.n_estimators),
            max_features=pick(self.max_features),
            min_samples_split=pick(self.min_samples_split),
            bootstrap=pick(self.bootstrap),
            seed=seed,
        )

    @classmethod
    def pinned(cls, hp: ForestHyperparams) -> SearchSpace:
        return cls(
            (hp.n_estimators,), (hp.max_features,), (hp.min_samples_split,), (hp.bootstrap,)
        )


@dataclass(frozen=True)
class SearchTrial:

    order: int
    hyperparams: ForestHyperparams
    report: EvaluationReport


def random_search(
    dataset: Sequence[ColocationSample],
    budget: int,
    space: SearchSpace,
    seed: int,
    k: int = 5,
    jobs: int = 1,
) -> List[SearchTrial]:
    """Evaluate `budget` configurations drawn from `space` with k-fold CV."""

    if budget < 1:
        raise ModelError(f"budget must be >= 1, got {budget}")
    if space.is_empty():
        raise ModelError("Empty hyperparameter search space")

    rng = np.random.default_rng(seed)
    trials = []
    for order in range(budget):
        hp = space.sample(rng, seed)
        report = cross_validate(dataset, k, hp, jobs)
        logger.info("Trial %d: %s -> mean CV R2 %.4f", order, hp, report.mean_fold_r2)
        trials.append(SearchTrial(order, hp, report))
    return trials


def best_trial(trials: Sequence[SearchTrial]) -> SearchTrial:
    """Highest mean CV R2; ties go to fewer estimators, then the earlier draw."""

    def rank(trial: SearchTrial) -> Tuple[float, int, int]:
        return (-trial.report.mean_fold_r2, trial.hyperparams.n_estimators, trial.order)

    return min(trials, key=rank)


def tune_hyperparameters(
    dataset: Sequence[ColocationSample],
    budget: int,
    space: SearchSpace,
    seed: int,
    k: int = 5,
    jobs: int = 1,
) -> Tuple[ForestHyperparams, EvaluationReport]:
    best = best_trial(random_search(dataset, budget, space, seed, k, jobs))
    return best.hyperparams, best.report


@dataclass(frozen=True)
class Assessment:

    holdout: EvaluationReport
    cv: Optional[EvaluationReport]


def assess(
    dataset: Sequence[ColocationSample],
    hp: ForestHyperparams,
    test_fraction: float = 0.3,
    k: int = 5,
    feature_set: Optional[FeatureSet] = None,
    jobs: int = 1,
) -> Assessment:
    """Holdout score plus k-fold CV over the training part of the same split.

    Held-out samples never reach a CV fold; k = 0 skips cross-validation."""

    train, test = holdout_split(dataset, test_fraction, hp.seed)
    model = train_forest(train, hp, feature_set, jobs)
    cv = cross_validate(train, k, hp, jobs) if k else None
    return Assessment(evaluate(model, test, len(train)), cv)


@dataclass(frozen=True)
class TuningResult:

    trials: Tuple[SearchTrial, ...]
    best: SearchTrial
    holdout: EvaluationReport


def holdout_tune(
    dataset: Sequence[ColocationSample],
    budget: int,
    space: SearchSpace,
    seed: int,
    test_fraction: float = 0.3,
    k: int = 5,
    feature_set: Optional[FeatureSet] = None,
    jobs: int = 1,
) -> TuningResult:
    """Random search on the training part of a holdout split, then score the winner on
    the held-out part it never saw."""

    train, test = holdout_split(dataset, test_fraction, seed)
    trials = random_search(train, budget, space, seed, k, jobs)
    best = best_trial(trials)
    model = train_forest(train, best.hyperparams, feature_set, jobs)
    return TuningResult(tuple(trials), best, evaluate(model, test, len(train)))


@dataclass(frozen=True)
class LinearModel:
    """Least-squares fit on standardized features: y = intercept + coef . (x - center) / scale."""

    intercept: float
    coef: Tuple[float, ...]
    center: Tuple[float, ...]
    scale: Tuple[float, ...]

    @property
    def slopes(self) -> Tuple[float, ...]:
        """Coefficients in the original feature units."""
        return tuple(c / s for c, s in zip(self.coef, self.scale))

    def predict_many(self, rows: Sequence[Sequence[float]]) -> List[float]:
        X = (np.asarray(rows, dtype=np.float64) - np.asarray(self.center)) / np.asarray(self.scale)
        return (self.intercept + X @ np.asarray(self.coef)).tolist()  # type: ignore


def fit_least_squares(dataset: Sequence[ColocationSample]) -> LinearModel:
    X, y = dataset_arrays(dataset)
    n, d = X.shape
    if n <= d:
        raise ModelError(f"Least squares needs more samples than features ({n} <= {d})")

    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = np.hstack([np.ones((n, 1)), (X - center) / scale])
    gram = Z.T @ Z + RIDGE * np.eye(d + 1)
    try:
        weights = np.linalg.solve(gram, Z.T @ y)
    except np.linalg.LinAlgError:
        raise ModelError("Least squares system is singular even with ridge term") from None
    if not np.all(np.isfinite(weights)):
        raise ModelError("Least squares system is singular even with ridge term")

    return LinearModel(
        intercept=float(weights[0]),
        coef=tuple(weights[1:].tolist()),
        center=tuple(center.tolist()),
        scale=tuple(scale.tolist()),
    )


def baseline_least_squares(
    dataset: Sequence[ColocationSample], test_fraction: float = 0.3, seed: int = 0
) -> Tuple[LinearModel, EvaluationReport]:
    """Linear sanity baseline, evaluated on the same kind of holdout split as the forest."""

    train, test = holdout_split(dataset, test_fraction, seed)
    model = fit_least_squares(train)
    actual = [sample.degradation for sample in test]
    predicted = model.predict_many([sample.features for sample in test])
    report = EvaluationReport(
        r2=r2_score(actual, predicted),
        per_fold_r2=(),
        n_train=len(train),
        n_test=len(test),
        predictions=tuple(zip(actual, predicted)),
    )
    return model, report


ALL_FEATURE_SETS = tuple(
    FeatureSet(group, mode) for group in CounterGroup for mode in StatMode
)


def compare_feature_sets(
    profiles: Union[Mapping[str, ApplicationProfile], Sequence[ApplicationProfile]],
    measurements: Sequence[ColocationMeasurement],
    hp: ForestHyperparams,
    test_fraction: float = 0.3,
    feature_sets: Sequence[FeatureSet] = ALL_FEATURE_SETS,
) -> Dict[FeatureSet, EvaluationReport]:
    """Holdout accuracy of the same forest configuration under each feature set.

    Feature sets the profiles cannot supply (for example all counters when only the
    generic subset was collected) are skipped."""

    reports = {}
    for feature_set in feature_sets:
        try:
            dataset = build_training_dataset(profiles, measurements, feature_set)
        except ValueError as e:
            logger.warning("Skipping feature set %s: %s", feature_set, e)
            continue
        _, reports[feature_set] = holdout_evaluate(
            dataset, hp, test_fraction, feature_set
        )
    return reports
