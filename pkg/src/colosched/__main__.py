import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
import pandas as pd

from .config import RunConfig
from .errors import ColocationError, ConfigError
from .evaluation import (
    Assessment,
    SearchSpace,
    assess,
    baseline_least_squares,
    compare_feature_sets,
    holdout_tune,
    r2_score,
)
from .forest import ForestHyperparams
from .model import DegradationModel, load_model, save_model, train_forest
from .profiles import (
    ApplicationProfile,
    CounterGroup,
    FeatureSet,
    StatMode,
    build_training_dataset,
    count_clamped,
    file_digest,
    index_profiles,
    parse_measurements,
    parse_profiles,
    read_dataset,
    write_dataset,
    write_measurements,
    write_profiles,
)
from .scheduler import JobQueue, Predictor, Strategy, plan_schedule
from .simulator import (
    ClusterConfig,
    estimator_sweep,
    measure_overhead,
    parse_policies,
    read_reports,
    run_experiment,
    summarize_reports,
)
from .workload import (
    DegradationOracle,
    Level,
    generate_random_queue,
    generate_random_queues,
    generate_stratified_queues,
    synth_workload,
)

LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO}

COUNTER_GROUPS = click.Choice([group.value for group in CounterGroup])
STAT_MODES = click.Choice([mode.value for mode in StatMode])
STRATEGIES = click.Choice([strategy.value for strategy in Strategy])
LEVELS = click.Choice([level.value for level in Level])

COUNTER_GROUP_OPTION = click.option(
    "--counter-group",
    type=COUNTER_GROUPS,
    default="generic",
    show_default=True,
    help="Counters read per application: 'generic' (on every architecture) or 'all'",
)
STAT_MODE_OPTION = click.option(
    "--stat-mode",
    type=STAT_MODES,
    default="mean",
    show_default=True,
    help="'mean' uses counter means only, 'full' adds min, max and sd",
)


def echo(*values: Any) -> None:
    print(*values, file=sys.stderr)


def _ints(text: str) -> List[int]:
    try:
        return [int(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise ConfigError(f"Expected a comma separated list of integers, got {text!r}") from None


def _header(**values: Any) -> None:
    """Report header on stdout; every report names the seed it ran with."""

    print(f"# colosched {' '.join(f'{key}={value}' for key, value in values.items())}")


def _hyperparams(
    estimators: int, max_features: str, min_samples_split: int, bootstrap: bool, seed: int
) -> ForestHyperparams:
    return ForestHyperparams(
        n_estimators=estimators,
        max_features=max_features,
        min_samples_split=min_samples_split,
        bootstrap=bootstrap,
        seed=seed,
    )


def _load_profiles(path: Path, feature_set: FeatureSet) -> Dict[str, ApplicationProfile]:
    return index_profiles(parse_profiles(path, feature_set))


def _print_assessment(assessment: Assessment) -> None:
    print(f"holdout_r2,{assessment.holdout.r2}")
    if assessment.cv is not None:
        for index, score in enumerate(assessment.cv.per_fold_r2):
            print(f"fold_{index}_r2,{score}")
        print(f"cv_mean_r2,{assessment.cv.mean_fold_r2}")


def _predictor_name(perfect: bool, model_path: Optional[Path]) -> str:
    if perfect:
        return "oracle"
    if model_path is None:
        return "none"
    return f"model:{file_digest(model_path)[:16]}"


class ColoschedGroup(click.Group):
    """Reports domain failures as a single `error_code: message` line with exit status 1."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except ColocationError as e:
            echo(f"{e.code}: {e}")
            ctx.exit(1)


def forest_options(command: Any) -> Any:
    """Random forest flags shared by train, tune, eval and sweep."""

    options = [
        click.option(
            "--estimators", default=22, show_default=True, help="Number of trees in the forest"
        ),
        click.option(
            "--max-features",
            default="sqrt",
            show_default=True,
            help="Features examined per split: 'all', 'sqrt' or a fraction in (0, 1]",
        ),
        click.option(
            "--min-samples-split",
            default=2,
            show_default=True,
            help="Minimum samples (count) a node needs to be split",
        ),
        click.option(
            "--bootstrap/--no-bootstrap",
            default=True,
            show_default=True,
            help="Grow each tree on a bootstrap resample",
        ),
        click.option("--seed", default=0, show_default=True, help="Random seed"),
        click.option(
            "--jobs", default=1, show_default=True, help="Worker threads used to grow trees"
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@click.group(cls=ColoschedGroup)
@click.pass_context
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, exists=True, path_type=Path),
    help="Flat YAML file pre-filling the flags of every command",
)
@click.option("-v", "--verbose", count=True, help="Log INFO (-v) or DEBUG (-vv) to stderr")
def colosched(ctx: click.Context, config_path: Optional[Path], verbose: int) -> None:
    """colosched predicts how much colocated HPC applications slow each other down
    and pairs queued jobs so the queue finishes sooner.

    A typical run goes `synth` (or measured CSVs) -> `dataset` -> `train` -> `schedule`
    -> `simulate` -> `compare`.

    All times are in seconds and all degradations in percent of the solo runtime."""

    logging.basicConfig(
        level=LOG_LEVELS.get(verbose, logging.DEBUG),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    if config_path is not None:
        config = RunConfig.from_yaml(config_path)
        ctx.default_map = config.default_map(colosched.commands)


@colosched.command()
@click.option("--n-apps", default=32, show_default=True, help="Number of applications")
@click.option("--seed", default=0, show_default=True, help="Random seed")
@click.option("--base-pct", default=0.0, show_default=True, help="Planted baseline (%)")
@click.option(
    "--sensitivity-pct", default=10.0, show_default=True, help="Primary pressure term (%)"
)
@click.option(
    "--pressure-pct", default=25.0, show_default=True, help="Interferer pressure term (%)"
)
@click.option(
    "--interaction-pct", default=60.0, show_default=True, help="Pressure product term (%)"
)
@click.option(
    "--interaction-exponent",
    default=1.0,
    show_default=True,
    help="Exponent applied to the pressure product",
)
@click.option(
    "--noise", default=0.05, show_default=True, help="Relative jitter of each degradation (0-1)"
)
@click.option(
    "--counter-group",
    type=COUNTER_GROUPS,
    default="generic",
    show_default=True,
    help="Counters to synthesize: 'generic' only, or 'all' adding architecture-specific ones",
)
@click.option(
    "-o",
    "--out-dir",
    default=".",
    show_default=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Directory receiving profiles.csv, oracle.csv and colocations.csv",
)
def synth(
    n_apps: int,
    seed: int,
    base_pct: float,
    sensitivity_pct: float,
    pressure_pct: float,
    interaction_pct: float,
    interaction_exponent: float,
    noise: float,
    counter_group: str,
    out_dir: Path,
) -> None:
    """Generate a synthetic workload with a known degradation oracle.

    Writes profiles, the oracle and the colocated runtimes it implies, then prints the
    three paths to STDOUT."""

    config = RunConfig(
        base_pct=base_pct,
        sensitivity_pct=sensitivity_pct,
        pressure_pct=pressure_pct,
        interaction_pct=interaction_pct,
        interaction_exponent=interaction_exponent,
        noise=noise,
    )
    profiles, oracle = synth_workload(
        n_apps, seed, config.synth_config(), CounterGroup(counter_group)
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / name for name in ("profiles.csv", "oracle.csv", "colocations.csv")]
    write_profiles(profiles, paths[0])
    oracle.save(paths[1])
    measurements = oracle.measurements()
    write_measurements(measurements, paths[2])

    echo(f"Synthesized {n_apps} applications and {len(measurements)} colocations (seed {seed})")
    for path in paths:
        print(path)


@colosched.command()
@click.argument("profiles_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.argument(
    "colocations_path", type=click.Path(dir_okay=False, exists=True, path_type=Path)
)
@COUNTER_GROUP_OPTION
@STAT_MODE_OPTION
@click.option(
    "-o",
    "--output",
    default="dataset.csv",
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
)
def dataset(
    profiles_path: Path,
    colocations_path: Path,
    counter_group: str,
    stat_mode: str,
    output: Path,
) -> None:
    """Build the training dataset from solo profiles and colocated runtimes.

    Every colocation row becomes one sample whose target is the degradation (%) of the
    primary application. Negative degradations are clamped to 0 and counted."""

    feature_set = FeatureSet(CounterGroup(counter_group), StatMode(stat_mode))
    profiles = _load_profiles(profiles_path, feature_set)
    measurements = parse_measurements(colocations_path)
    samples = build_training_dataset(profiles, measurements, feature_set)
    provenance = {
        "profiles_sha256": file_digest(profiles_path),
        "colocations_sha256": file_digest(colocations_path),
    }
    write_dataset(samples, feature_set, output, provenance)

    echo(
        f"{len(samples)} samples, {feature_set.n_features} features ({feature_set}), "
        f"{count_clamped(profiles, measurements)} clamped to 0"
    )
    print(output)


@colosched.command()
@click.argument("dataset_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@forest_options
@click.option(
    "--holdout", default=0.3, show_default=True, help="Held-out fraction of samples (0-1)"
)
@click.option(
    "--folds", default=5, show_default=True, help="Cross-validation folds; 0 skips CV"
)
@click.option(
    "-o",
    "--output",
    default="model.json",
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
)
def train(
    dataset_path: Path,
    estimators: int,
    max_features: str,
    min_samples_split: int,
    bootstrap: bool,
    seed: int,
    jobs: int,
    holdout: float,
    folds: int,
    output: Path,
) -> None:
    """Train the degradation model and report its accuracy.

    Prints the holdout R2 and the per-fold R2 of cross-validation over the training part
    of the split to STDOUT, then writes a model trained on every sample."""

    feature_set, samples = read_dataset(dataset_path)
    hp = _hyperparams(estimators, max_features, min_samples_split, bootstrap, seed)

    _header(command="train", seed=seed, feature_set=feature_set, estimators=estimators)
    assessment = assess(samples, hp, holdout, folds, feature_set, jobs)
    _print_assessment(assessment)

    model = train_forest(samples, hp, feature_set, jobs)
    started = time.perf_counter()
    model.predict_many([sample.features for sample in samples])
    elapsed = time.perf_counter() - started
    echo(f"Predicting {len(samples)} samples with {estimators} trees took {elapsed:.6f} s")

    save_model(model, output)
    echo(f"Model written to {output}")


@colosched.command()
@click.argument("dataset_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option("--budget", default=20, show_default=True, help="Configurations to evaluate")
@click.option(
    "--holdout", default=0.3, show_default=True, help="Held-out fraction of samples (0-1)"
)
@click.option("--folds", default=5, show_default=True, help="Cross-validation folds (k)")
@click.option("--seed", default=0, show_default=True, help="Random seed")
@click.option("--jobs", default=1, show_default=True, help="Worker threads used to grow trees")
@click.option(
    "-o",
    "--output",
    default="model.json",
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
)
def tune(
    dataset_path: Path,
    budget: int,
    holdout: float,
    folds: int,
    seed: int,
    jobs: int,
    output: Path,
) -> None:
    """Random search over forest hyperparameters scored by k-fold CV.

    The search only sees the training part of the holdout split. Prints one line per
    trial, the winner and its holdout R2 to STDOUT, then writes a model trained on every
    sample with the winning configuration."""

    feature_set, samples = read_dataset(dataset_path)
    tuning = holdout_tune(samples, budget, SearchSpace(), seed, holdout, folds, feature_set, jobs)

    _header(command="tune", seed=seed, feature_set=feature_set, budget=budget)
    print("trial,n_estimators,max_features,min_samples_split,bootstrap,cv_mean_r2")
    for trial in tuning.trials:
        hp = trial.hyperparams
        print(
            f"{trial.order},{hp.n_estimators},{hp.max_features},{hp.min_samples_split},"
            f"{hp.bootstrap},{trial.report.mean_fold_r2}"
        )
    best = tuning.best
    print(f"best,{best.order}")
    print(f"holdout_r2,{tuning.holdout.r2}")

    save_model(train_forest(samples, best.hyperparams, feature_set, jobs), output)
    echo(f"Best configuration: {best.hyperparams}; model written to {output}")


@colosched.command("eval")
@click.argument("dataset_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@forest_options
@click.option(
    "--holdout", default=0.3, show_default=True, help="Held-out fraction of samples (0-1)"
)
@click.option("--folds", default=5, show_default=True, help="Cross-validation folds (k)")
@click.option(
    "--feature-sets",
    nargs=2,
    type=click.Path(dir_okay=False, exists=True, path_type=Path),
    default=None,
    help="PROFILES COLOCATIONS: also compare holdout R2 across every feature set",
)
def evaluate(
    dataset_path: Path,
    estimators: int,
    max_features: str,
    min_samples_split: int,
    bootstrap: bool,
    seed: int,
    jobs: int,
    holdout: float,
    folds: int,
    feature_sets: Optional[Sequence[Path]],
) -> None:
    """Evaluate a forest configuration without writing a model.

    Reports holdout R2, per-fold CV R2 and a least-squares baseline on the same split."""

    feature_set, samples = read_dataset(dataset_path)
    hp = _hyperparams(estimators, max_features, min_samples_split, bootstrap, seed)

    _header(command="eval", seed=seed, feature_set=feature_set, estimators=estimators)
    _print_assessment(assess(samples, hp, holdout, folds, feature_set, jobs))
    try:
        _, baseline = baseline_least_squares(samples, holdout, seed)
        print(f"least_squares_r2,{baseline.r2}")
    except ColocationError as e:
        echo(f"Least-squares baseline skipped: {e}")

    if feature_sets:
        profiles_path, colocations_path = feature_sets
        profiles = _richest_profiles(profiles_path)
        reports = compare_feature_sets(
            profiles, parse_measurements(colocations_path), hp, holdout
        )
        for compared, compared_report in reports.items():
            print(f"feature_set_r2,{compared},{compared_report.r2}")


def _richest_profiles(path: Path) -> List[ApplicationProfile]:
    """Profiles read with the widest feature set the file supports."""

    candidates = [FeatureSet(group, StatMode.FULL) for group in CounterGroup]
    candidates.append(FeatureSet(CounterGroup.GENERIC, StatMode.MEAN))
    error: Optional[ColocationError] = None
    for feature_set in candidates:
        try:
            return parse_profiles(path, feature_set)
        except ColocationError as e:
            error = e
    assert error is not None
    raise error


@colosched.command()
@click.argument("dataset_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.argument("model_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option(
    "-o",
    "--output",
    default=None,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the (actual, predicted) scatter as CSV instead of STDOUT",
)
def predict(dataset_path: Path, model_path: Path, output: Optional[Path]) -> None:
    """Predict the degradation (%) of every dataset sample with a trained model."""

    feature_set, samples = read_dataset(dataset_path)
    model = load_model(model_path)
    if model.feature_set is not None and model.feature_set != feature_set:
        raise ConfigError(
            f"Feature set mismatch: model {model.feature_set}, dataset {feature_set}"
        )

    predicted = model.predict_many([sample.features for sample in samples])
    frame = pd.DataFrame(
        {
            "primary_id": [sample.primary_id for sample in samples],
            "interfering_id": [sample.interfering_id for sample in samples],
            "actual_pct": [sample.degradation for sample in samples],
            "predicted_pct": predicted,
        }
    )
    if output is None:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    else:
        frame.to_csv(output, index=False, lineterminator="\n")
        print(output)
    try:
        echo(f"R2 over {len(samples)} samples: {r2_score(frame['actual_pct'], predicted):.4f}")
    except ColocationError as e:
        echo(f"R2 not reported: {e}")


@colosched.command()
@click.argument("queue_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.argument("profiles_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option(
    "--model",
    "model_path",
    type=click.Path(dir_okay=False, exists=True, path_type=Path),
    help="Trained model (required for blossom and greedy)",
)
@click.option("--strategy", type=STRATEGIES, default="blossom", show_default=True)
@COUNTER_GROUP_OPTION
@STAT_MODE_OPTION
@click.option(
    "-o",
    "--output",
    default="schedule.json",
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
)
def schedule(
    queue_path: Path,
    profiles_path: Path,
    model_path: Optional[Path],
    strategy: str,
    counter_group: str,
    stat_mode: str,
    output: Path,
) -> None:
    """Pair the jobs of a queue and write the schedule.

    Profiles are read with the model's feature set. The predicted makespan (s) on one
    server is printed to STDOUT."""

    model = load_model(model_path) if model_path is not None else None
    feature_set = FeatureSet(CounterGroup(counter_group), StatMode(stat_mode))
    if model is not None and model.feature_set is not None:
        feature_set = model.feature_set
    profiles = _load_profiles(profiles_path, feature_set)

    plan, timing = plan_schedule(JobQueue.load(queue_path), profiles, Strategy(strategy), model)
    plan.save(output)

    pairs = sum(1 for entry in plan.entries if entry.is_pair)
    echo(
        f"{pairs} pair(s), {len(plan.entries) - pairs} solo job(s); "
        f"predict {timing.predict_time:.6f} s, solve {timing.solve_time:.6f} s"
    )
    print(plan.predicted_makespan)


@colosched.command()
@click.argument("profiles_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.argument("oracle_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option(
    "--model",
    "model_path",
    type=click.Path(dir_okay=False, exists=True, path_type=Path),
    help="Trained model planning blossom and greedy",
)
@click.option(
    "--perfect", is_flag=True, default=False, help="Plan with the oracle instead of a model"
)
@click.option(
    "--policies",
    default="fifo,fifo-shared,di,blossom,greedy",
    show_default=True,
    help="Comma separated policies to simulate",
)
@click.option("--queues", default=20, show_default=True, help="Number of queues")
@click.option(
    "--queue-size",
    default=50,
    show_default=True,
    help="Jobs per queue on one server; scaled by servers and jobs-per-server-scale",
)
@click.option(
    "--level",
    type=LEVELS,
    default=None,
    help="Draw stratified queues of this degradation band instead of random ones",
)
@click.option("--servers", default=1, show_default=True, help="Number of servers")
@click.option(
    "--jobs-per-server-scale",
    default=1,
    show_default=True,
    help="Queue length multiplier per server",
)
@click.option("--seed", default=0, show_default=True, help="Random seed")
@COUNTER_GROUP_OPTION
@STAT_MODE_OPTION
@click.option(
    "--charge-overhead",
    is_flag=True,
    default=False,
    help="Add measured prediction and solving time (s) to model-driven makespans",
)
@click.option(
    "--timings/--no-timings",
    default=False,
    show_default=True,
    help="Record wall-clock predict and solve time (s) in report.csv",
)
@click.option(
    "-o",
    "--output",
    default="report.csv",
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
)
@click.option(
    "--timeline",
    "timeline_path",
    default="timeline.json",
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
)
def simulate(
    profiles_path: Path,
    oracle_path: Path,
    model_path: Optional[Path],
    perfect: bool,
    policies: str,
    queues: int,
    queue_size: int,
    level: Optional[str],
    servers: int,
    jobs_per_server_scale: int,
    seed: int,
    counter_group: str,
    stat_mode: str,
    charge_overhead: bool,
    timings: bool,
    output: Path,
    timeline_path: Path,
) -> None:
    """Simulate queues under each policy against the true degradations.

    Writes report.csv (makespans in s, normalized to FIFO) and timeline.json, then prints
    the mean normalized makespan per policy to STDOUT."""

    model = load_model(model_path) if model_path is not None else None
    feature_set = FeatureSet(CounterGroup(counter_group), StatMode(stat_mode))
    if model is not None and model.feature_set is not None:
        feature_set = model.feature_set
    profiles = _load_profiles(profiles_path, feature_set)
    oracle = DegradationOracle.load(oracle_path, profiles)

    predictor: Optional[Predictor] = oracle if perfect else model
    cluster = ClusterConfig(servers, jobs_per_server_scale)
    size = cluster.queue_length(queue_size)
    if level is None:
        job_queues = generate_random_queues(sorted(profiles), queues, size, seed)
    else:
        job_queues = generate_stratified_queues(oracle, Level(level), queues, size, seed)

    selected = parse_policies(policies)
    report = run_experiment(
        selected, job_queues, profiles, oracle, predictor, cluster, charge_overhead
    )
    header = [
        f"seed={seed} servers={servers} queues={queues} queue_length={size} "
        f"level={level or 'random'} predictor={_predictor_name(perfect, model_path)}"
    ]
    report.write_csv(output, header, timings=timings or charge_overhead)
    report.write_timelines(timeline_path)

    _header(command="simulate", seed=seed, servers=servers, queues=queues)
    print("policy,mean_normalized")
    for policy in selected:
        print(f"{policy.value},{report.mean_normalized(policy)}")
    echo(f"Report written to {output}, timelines to {timeline_path}")


@colosched.command()
@click.argument(
    "reports", nargs=-1, required=True, type=click.Path(dir_okay=False, path_type=Path)
)
def compare(reports: Sequence[Path]) -> None:
    """Merge report.csv files and print count, mean, min and max normalized makespan per
    policy and server count."""

    summary = summarize_reports(read_reports(reports))
    summary.to_csv(sys.stdout, index=False, lineterminator="\n")


@colosched.command()
@click.argument("dataset_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.argument("profiles_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option(
    "--counts",
    default="1,2,4,6,10,16,22",
    show_default=True,
    help="Comma separated tree counts to compare",
)
@forest_options
@click.option(
    "--holdout", default=0.3, show_default=True, help="Held-out fraction of samples (0-1)"
)
@click.option("--queue-size", default=50, show_default=True, help="Jobs in the timed queue")
@click.option("--repeats", default=3, show_default=True, help="Timing repetitions (best kept)")
def sweep(
    dataset_path: Path,
    profiles_path: Path,
    counts: str,
    estimators: int,
    max_features: str,
    min_samples_split: int,
    bootstrap: bool,
    seed: int,
    jobs: int,
    holdout: float,
    queue_size: int,
    repeats: int,
) -> None:
    """Trade accuracy for prediction time by shrinking the forest.

    For each tree count prints holdout R2 and the time (s) to predict every job pair of
    one random queue, relative to the largest count."""

    feature_set, samples = read_dataset(dataset_path)
    profiles = _load_profiles(profiles_path, feature_set)
    hp = _hyperparams(estimators, max_features, min_samples_split, bootstrap, seed)
    queue = generate_random_queue(sorted(profiles), queue_size, seed)
    rows = estimator_sweep(
        samples, feature_set, _ints(counts), hp, queue, profiles, holdout, repeats, jobs
    )

    _header(command="sweep", seed=seed, feature_set=feature_set, queue_size=queue_size)
    reference = max(rows, key=lambda row: row.n_estimators).predict_time
    print("n_estimators,holdout_r2,predict_time_s,predict_time_ratio")
    for row in rows:
        ratio = row.predict_time / reference if reference > 0 else float("nan")
        print(f"{row.n_estimators},{row.r2},{row.predict_time},{ratio}")


@colosched.command()
@click.argument("profiles_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.argument("model_path", type=click.Path(dir_okay=False, exists=True, path_type=Path))
@click.option(
    "--sizes", default="10,25,50,100", show_default=True, help="Comma separated queue lengths"
)
@click.option("--seed", default=0, show_default=True, help="Random seed")
@click.option("--repeats", default=3, show_default=True, help="Timing repetitions (best kept)")
def overhead(profiles_path: Path, model_path: Path, sizes: str, seed: int, repeats: int) -> None:
    """Measure scheduling overhead (s) as the queue grows: predicting every pair, then
    solving with blossom and with greedy."""

    model: DegradationModel = load_model(model_path)
    feature_set = model.feature_set or FeatureSet()
    profiles = _load_profiles(profiles_path, feature_set)
    rows = measure_overhead(_ints(sizes), profiles, model, seed, repeats)

    _header(command="overhead", seed=seed, estimators=model.hyperparams.n_estimators)
    print("n_jobs,predict_time_s,blossom_time_s,greedy_time_s")
    for row in rows:
        print(f"{row.n_jobs},{row.predict_time},{row.blossom_time},{row.greedy_time}")
