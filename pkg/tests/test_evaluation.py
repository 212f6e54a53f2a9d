import math
from typing import List, Sequence

import numpy as np
import pytest
from conftest import GENERIC_MEAN, SEED, Workload

from colosched.errors import ModelError
from colosched.evaluation import (
    ALL_FEATURE_SETS,
    SearchSpace,
    assess,
    baseline_least_squares,
    best_trial,
    compare_feature_sets,
    cross_validate,
    fit_least_squares,
    holdout_evaluate,
    holdout_split,
    holdout_tune,
    kfold_indices,
    r2_score,
    random_search,
    tune_hyperparameters,
)
from colosched.forest import ForestHyperparams
from colosched.profiles import (
    ColocationSample,
    CounterGroup,
    FeatureSet,
    StatMode,
    build_training_dataset,
)
from colosched.workload import synth_workload

R2_PARAMS = [
    ([0.0, 10.0, 20.0], [0.0, 10.0, 20.0], 1.0),
    ([0.0, 10.0, 20.0], [0.0, 10.0, 50.0], -3.5),
    ([0.0, 10.0, 20.0], [10.0, 10.0, 10.0], 0.0),
]


@pytest.mark.parametrize("actual, predicted, expected", R2_PARAMS)
def test_r2_score(actual: List[float], predicted: List[float], expected: float) -> None:
    assert r2_score(actual, predicted) == pytest.approx(expected, abs=1e-12)


def test_r2_identities() -> None:
    rng = np.random.default_rng(0)
    for _ in range(500):
        actual = rng.normal(0.0, 10.0, int(rng.integers(2, 50)))
        if np.ptp(actual) == 0:
            continue
        assert r2_score(actual.tolist(), actual.tolist()) == 1.0
        mean = [float(actual.mean())] * len(actual)
        assert r2_score(actual.tolist(), mean) == pytest.approx(0.0, abs=1e-9)
        noisy = actual + rng.normal(0.0, 1.0, len(actual))
        score = r2_score(actual.tolist(), noisy.tolist())
        assert score <= 1.0
        shifted = r2_score((actual + 40.0).tolist(), (noisy + 40.0).tolist())
        assert shifted == pytest.approx(score, abs=1e-9)


@pytest.mark.parametrize(
    "actual, predicted, message",
    [([1.0, 1.0], [1.0, 2.0], "zero variance"), ([], [], "empty"), ([1.0], [1.0, 2.0], "Length")],
)
def test_r2_score_errors(actual: List[float], predicted: List[float], message: str) -> None:
    with pytest.raises(ModelError, match=message):
        r2_score(actual, predicted)


HOLDOUT_PARAMS = [(10, 0.3, 3), (992, 0.3, 298), (7, 0.5, 4), (4, 0.1, 0)]


@pytest.mark.parametrize("n, fraction, n_test", HOLDOUT_PARAMS)
def test_holdout_split(n: int, fraction: float, n_test: int) -> None:
    items = list(range(n))
    train, test = holdout_split(items, fraction, 3)
    assert len(test) == n_test
    assert len(train) == n - n_test
    assert sorted(train + test) == items
    assert holdout_split(items, fraction, 3) == (train, test)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2])
def test_holdout_split_invalid(fraction: float) -> None:
    with pytest.raises(ModelError):
        holdout_split([1, 2, 3], fraction, 0)


KFOLD_PARAMS = [(100, 5, [20] * 5), (11, 3, [4, 4, 3]), (5, 5, [1] * 5)]


@pytest.mark.parametrize("n, k, sizes", KFOLD_PARAMS)
def test_kfold_indices(n: int, k: int, sizes: Sequence[int]) -> None:
    folds = kfold_indices(n, k, 1)
    assert [len(fold) for fold in folds] == sizes
    assert sorted(np.concatenate(folds).tolist()) == list(range(n))


@pytest.mark.parametrize("n, k", [(5, 1), (3, 4)])
def test_kfold_indices_invalid(n: int, k: int) -> None:
    with pytest.raises(ModelError):
        kfold_indices(n, k, 0)


def _linear_samples(n: int, seed: int, noise: float = 0.0) -> List[ColocationSample]:
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 10.0, (n, 3))
    y = 5.0 + 2.0 * X[:, 0] - 3.0 * X[:, 1] + 0.5 * X[:, 2] + rng.normal(0.0, noise, n)
    return [
        ColocationSample(tuple(row.tolist()), float(target), f"p{i}", f"q{i}")
        for i, (row, target) in enumerate(zip(X, y))
    ]


def test_cross_validate() -> None:
    samples = _linear_samples(100, 0)
    report = cross_validate(samples, 5, ForestHyperparams(n_estimators=10, seed=1))
    assert len(report.per_fold_r2) == 5
    assert len(report.predictions) == 100
    assert report.n_test == 20
    assert report.r2 > 0.8


def test_leave_one_out_falls_back_to_pooled_r2() -> None:
    samples = _linear_samples(6, 1)
    report = cross_validate(samples, 6, ForestHyperparams(n_estimators=3, seed=0))
    assert all(math.isnan(score) for score in report.per_fold_r2)
    assert report.mean_fold_r2 == report.r2


def test_random_search_budget_one() -> None:
    samples = _linear_samples(40, 2)
    space = SearchSpace(n_estimators=(2, 4), min_samples_split=(2, 3))
    (trial,) = random_search(samples, 1, space, seed=5, k=4)
    best, report = tune_hyperparameters(samples, 1, space, seed=5, k=4)
    assert best == trial.hyperparams
    assert report.r2 == trial.report.r2
    assert best.seed == 5


def test_pinned_search_space() -> None:
    hp = ForestHyperparams(n_estimators=3, max_features=0.5, min_samples_split=4, seed=2)
    trials = random_search(_linear_samples(30, 3), 3, SearchSpace.pinned(hp), seed=2, k=3)
    assert {trial.hyperparams for trial in trials} == {hp}


def test_search_rejects() -> None:
    samples = _linear_samples(20, 0)
    with pytest.raises(ModelError, match="budget"):
        random_search(samples, 0, SearchSpace(), seed=0)
    with pytest.raises(ModelError, match="Empty"):
        random_search(samples, 1, SearchSpace(bootstrap=()), seed=0)


def test_best_trial_prefers_fewer_estimators() -> None:
    samples = _linear_samples(30, 4)
    trials = random_search(samples, 6, SearchSpace(n_estimators=(2, 5, 9)), seed=1, k=3)
    best = best_trial(trials)
    top = max(trial.report.mean_fold_r2 for trial in trials)
    assert best.report.mean_fold_r2 == top
    assert best.hyperparams.n_estimators == min(
        trial.hyperparams.n_estimators for trial in trials if trial.report.mean_fold_r2 == top
    )


def test_least_squares_recovers_linear_function() -> None:
    samples = _linear_samples(50, 5)
    model = fit_least_squares(samples)
    assert model.slopes == pytest.approx((2.0, -3.0, 0.5), abs=1e-6)
    _, report = baseline_least_squares(samples, 0.3, 0)
    assert report.r2 == pytest.approx(1.0, abs=1e-6)


def test_least_squares_constant_target() -> None:
    samples = [
        ColocationSample(sample.features, 7.0, sample.primary_id, sample.interfering_id)
        for sample in _linear_samples(20, 6)
    ]
    model = fit_least_squares(samples)
    assert model.intercept == pytest.approx(7.0)
    assert model.coef == pytest.approx((0.0, 0.0, 0.0), abs=1e-6)


def test_least_squares_needs_more_samples_than_features() -> None:
    with pytest.raises(ModelError, match="more samples"):
        fit_least_squares(_linear_samples(3, 0))


def test_forest_beats_linear_baseline(samples: List[ColocationSample]) -> None:
    _, linear = baseline_least_squares(samples, 0.3, SEED)
    _, forest = holdout_evaluate(samples, ForestHyperparams(seed=SEED), 0.3)
    assert forest.r2 >= linear.r2


def test_compare_feature_sets_skips_missing_counters(workload: Workload) -> None:
    profiles, oracle = workload
    reports = compare_feature_sets(
        profiles, oracle.measurements(), ForestHyperparams(n_estimators=6, seed=SEED)
    )
    assert len(ALL_FEATURE_SETS) == 4
    assert set(reports) == {
        FeatureSet(CounterGroup.GENERIC, StatMode.MEAN),
        FeatureSet(CounterGroup.GENERIC, StatMode.FULL),
    }
    assert all(report.n_test == 298 for report in reports.values())


def test_compare_feature_sets_over_all_counters() -> None:
    profiles, oracle = synth_workload(12, SEED, counter_group=CounterGroup.ALL)
    reports = compare_feature_sets(
        profiles, oracle.measurements(), ForestHyperparams(n_estimators=6, seed=SEED)
    )
    assert list(reports) == list(ALL_FEATURE_SETS)
    assert all(report.n_test == 40 for report in reports.values())
    assert all(report.r2 <= 1.0 for report in reports.values())


def test_assess_keeps_holdout_out_of_cross_validation() -> None:
    samples = _linear_samples(60, 7, noise=0.5)
    hp = ForestHyperparams(n_estimators=3, seed=4)
    assessment = assess(samples, hp, 0.3, 4)
    train, test = holdout_split(samples, 0.3, hp.seed)
    assert assessment.holdout.n_train == len(train) == 42
    assert assessment.holdout.n_test == len(test) == 18

    assert assessment.cv is not None
    assert len(assessment.cv.per_fold_r2) == 4
    folded = sorted(actual for actual, _ in assessment.cv.predictions)
    assert folded == sorted(sample.degradation for sample in train)
    assert not set(folded) & {sample.degradation for sample in test}

    assert assess(samples, hp, 0.3, 0).cv is None


def test_holdout_tune_searches_training_rows_only() -> None:
    samples = _linear_samples(50, 8, noise=0.5)
    space = SearchSpace(n_estimators=(2, 3), min_samples_split=(2, 4))
    result = holdout_tune(samples, 3, space, seed=3, k=3)
    train, test = holdout_split(samples, 0.3, 3)
    training_targets = sorted(sample.degradation for sample in train)
    assert len(result.trials) == 3
    assert result.best == best_trial(result.trials)
    for trial in result.trials:
        assert sorted(actual for actual, _ in trial.report.predictions) == training_targets
    assert (result.holdout.n_train, result.holdout.n_test) == (len(train), len(test))
    assert sorted(actual for actual, _ in result.holdout.predictions) == sorted(
        sample.degradation for sample in test
    )


def test_tuning_matches_default_hyperparameters() -> None:
    profiles, oracle = synth_workload(16, SEED)
    samples = build_training_dataset(profiles, oracle.measurements(), GENERIC_MEAN)
    # Trials reuse the search seed, so every configuration is scored on the same folds.
    _, tuned = tune_hyperparameters(samples, 30, SearchSpace(), seed=SEED, k=3)
    default = cross_validate(samples, 3, ForestHyperparams(seed=SEED))
    assert tuned.mean_fold_r2 >= default.mean_fold_r2
