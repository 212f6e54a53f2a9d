import json
from pathlib import Path
from typing import Dict, List, Union

import pytest
from click.testing import CliRunner, Result
from conftest import generic_rows, profiles_csv

from colosched.__main__ import colosched
from colosched.profiles import ALL_COUNTERS, CounterGroup, FeatureSet, StatMode
from colosched.scheduler import JobQueue, Schedule

N_APPS = "12"

Arg = Union[str, Path]


def _invoke(*args: Arg) -> Result:
    result = CliRunner().invoke(colosched, [str(arg) for arg in args])
    assert result.exit_code == 0, result.output
    return result


def _failure(*args: Arg) -> Result:
    result = CliRunner().invoke(colosched, [str(arg) for arg in args])
    assert result.exit_code == 1
    return result


def _pipeline(directory: Path) -> Dict[str, Path]:
    """synth -> dataset -> train -> schedule -> simulate inside `directory`."""

    paths = {
        name: directory / file
        for name, file in [
            ("profiles", "profiles.csv"),
            ("oracle", "oracle.csv"),
            ("colocations", "colocations.csv"),
            ("dataset", "dataset.csv"),
            ("model", "model.json"),
            ("queue", "queue.json"),
            ("schedule", "schedule.json"),
            ("report", "report.csv"),
            ("timeline", "timeline.json"),
        ]
    }
    _invoke("synth", "--n-apps", N_APPS, "--seed", "1", "-o", directory)
    _invoke("dataset", paths["profiles"], paths["colocations"], "-o", paths["dataset"])
    _invoke("train", paths["dataset"], "--estimators", "6", "--seed", "1", "-o", paths["model"])
    JobQueue(("app00", "app03", "app05", "app07", "app11", "app02")).save(paths["queue"])
    _invoke(
        "schedule",
        paths["queue"],
        paths["profiles"],
        "--model",
        paths["model"],
        "-o",
        paths["schedule"],
    )
    _invoke(
        "simulate",
        paths["profiles"],
        paths["oracle"],
        "--model",
        paths["model"],
        "--queues",
        "3",
        "--queue-size",
        "10",
        "--seed",
        "1",
        "-o",
        paths["report"],
        "--timeline",
        paths["timeline"],
    )
    return paths


@pytest.fixture(name="pipeline", scope="module")
def fixture_pipeline(tmp_path_factory: pytest.TempPathFactory) -> Dict[str, Path]:
    return _pipeline(tmp_path_factory.mktemp("pipeline"))


def test_pipeline_is_reproducible(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    again = _pipeline(tmp_path)
    for name in ("dataset", "model", "schedule", "report", "timeline"):
        assert again[name].read_bytes() == pipeline[name].read_bytes(), name


def test_synth_prints_paths(tmp_path: Path) -> None:
    result = _invoke("synth", "--n-apps", "4", "-o", tmp_path)
    assert result.output.splitlines()[-3:] == [
        str(tmp_path / "profiles.csv"),
        str(tmp_path / "oracle.csv"),
        str(tmp_path / "colocations.csv"),
    ]
    lines = (tmp_path / "colocations.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 4 * 3


def test_synth_all_counters(tmp_path: Path) -> None:
    _invoke("synth", "--n-apps", "4", "--counter-group", "all", "-o", tmp_path)
    profiles = tmp_path / "profiles.csv"
    assert len(profiles.read_text(encoding="utf-8").splitlines()) == 1 + 4 * len(ALL_COUNTERS)
    dataset = tmp_path / "dataset.csv"
    _invoke(
        "dataset",
        profiles,
        tmp_path / "colocations.csv",
        "--counter-group",
        "all",
        "--stat-mode",
        "full",
        "-o",
        dataset,
    )
    header = next(
        line
        for line in dataset.read_text(encoding="utf-8").splitlines()
        if not line.startswith("#")
    )
    assert len(header.split(",")) == 3 + FeatureSet(CounterGroup.ALL, StatMode.FULL).n_features


def test_dataset_rows_match_colocations(pipeline: Dict[str, Path]) -> None:
    rows = [
        line
        for line in pipeline["dataset"].read_text(encoding="utf-8").splitlines()
        if not line.startswith("#")
    ]
    assert len(rows) == 1 + 12 * 11


def test_dataset_reports_clamped_rows(tmp_path: Path) -> None:
    profiles = profiles_csv(
        tmp_path / "profiles.csv", generic_rows("a", 100.0) + generic_rows("b", 50.0)
    )
    colocations = tmp_path / "colocations.csv"
    colocations.write_text(
        "primary_id,interfering_id,t_coloc_s\na,b,90\nb,a,75\n", encoding="utf-8"
    )
    result = _invoke("dataset", profiles, colocations, "-o", tmp_path / "dataset.csv")
    assert "2 samples, 20 features (generic/mean), 1 clamped to 0" in result.output


def test_train_prints_scores(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    result = _invoke(
        "train", pipeline["dataset"], "--estimators", "4", "-o", tmp_path / "model.json"
    )
    keys = [line.split(",")[0] for line in result.output.splitlines() if "," in line]
    assert keys == ["holdout_r2"] + [f"fold_{k}_r2" for k in range(5)] + ["cv_mean_r2"]
    assert result.output.startswith("# colosched command=train seed=0")
    assert len(json.loads((tmp_path / "model.json").read_text(encoding="utf-8"))["trees"]) == 4


def test_train_is_seeded(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    for name in ("a.json", "b.json"):
        output = tmp_path / name
        _invoke("train", pipeline["dataset"], "--estimators", "3", "--folds", "0", "-o", output)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_tune(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    result = _invoke(
        "tune", pipeline["dataset"], "--budget", "2", "--folds", "3", "-o", tmp_path / "m.json"
    )
    lines = [line for line in result.output.splitlines() if not line.startswith("Best ")]
    assert lines[1].startswith("trial,n_estimators")
    assert len(lines) == 2 + 2 + 2
    assert lines[-2] in ("best,0", "best,1")
    assert lines[-1].startswith("holdout_r2,")
    assert float(lines[-1].split(",")[1]) <= 1.0
    assert (tmp_path / "m.json").exists()


def test_eval(pipeline: Dict[str, Path]) -> None:
    result = _invoke(
        "eval",
        pipeline["dataset"],
        "--estimators",
        "4",
        "--folds",
        "3",
        "--feature-sets",
        pipeline["profiles"],
        pipeline["colocations"],
    )
    keys = [line.split(",")[0] for line in result.output.splitlines() if "," in line]
    assert keys.count("least_squares_r2") == 1
    assert "feature_set_r2,generic/mean" in result.output
    assert "feature_set_r2,generic/full" in result.output


def test_predict(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    _invoke("predict", pipeline["dataset"], pipeline["model"], "-o", tmp_path / "scatter.csv")
    lines = (tmp_path / "scatter.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "primary_id,interfering_id,actual_pct,predicted_pct"
    assert len(lines) == 1 + 12 * 11


def _predicted_makespan(result: Result) -> float:
    # The makespan is the last line written.
    return float(result.output.splitlines()[-1])


def test_schedule_strategies(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    makespans = {}
    for strategy in ("blossom", "greedy"):
        result = _invoke(
            "schedule",
            pipeline["queue"],
            pipeline["profiles"],
            "--model",
            pipeline["model"],
            "--strategy",
            strategy,
            "-o",
            tmp_path / f"{strategy}.json",
        )
        makespans[strategy] = _predicted_makespan(result)
    assert makespans["greedy"] >= makespans["blossom"] - 1e-9
    blossom = Schedule.load(tmp_path / "blossom.json")
    assert blossom.predicted_makespan == makespans["blossom"]
    assert blossom.jobs == list(range(6))


def test_schedule_two_jobs_with_di(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    JobQueue(("app01", "app02")).save(tmp_path / "queue.json")
    _invoke(
        "schedule",
        tmp_path / "queue.json",
        pipeline["profiles"],
        "--strategy",
        "di",
        "-o",
        tmp_path / "schedule.json",
    )
    document = json.loads((tmp_path / "schedule.json").read_text(encoding="utf-8"))
    assert document["strategy"] == "di"
    assert [sorted(entry) for entry in document["entries"]] == [["pair", "weight_s"]]


def test_schedule_odd_queue(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    JobQueue(("app01", "app02", "app04", "app06", "app08")).save(tmp_path / "queue.json")
    _invoke(
        "schedule",
        tmp_path / "queue.json",
        pipeline["profiles"],
        "--model",
        pipeline["model"],
        "-o",
        tmp_path / "schedule.json",
    )
    entries = Schedule.load(tmp_path / "schedule.json").entries
    assert sum(1 for entry in entries if not entry.is_pair) % 2 == 1


def test_simulate_output(pipeline: Dict[str, Path]) -> None:
    text = pipeline["report"].read_text(encoding="utf-8")
    assert text.startswith("# seed=1 servers=1 queues=3 queue_length=10 level=random")
    rows = text.splitlines()[2:]
    assert len(rows) == 3 * 5
    assert {row.split(",")[5] for row in rows} == {"0.0"}
    assert len(json.loads(pipeline["timeline"].read_text(encoding="utf-8"))["runs"]) == 15


def test_simulate_perfect_stratified(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    result = _invoke(
        "simulate",
        pipeline["profiles"],
        pipeline["oracle"],
        "--perfect",
        "--policies",
        "fifo,blossom",
        "--level",
        "low",
        "--queues",
        "2",
        "--queue-size",
        "6",
        "-o",
        tmp_path / "report.csv",
        "--timeline",
        tmp_path / "timeline.json",
    )
    lines = result.output.splitlines()
    assert lines[1:3] == ["policy,mean_normalized", "fifo,1.0"]
    assert lines[3].startswith("blossom,")
    assert float(lines[3].split(",")[1]) <= 1.0
    assert "predictor=oracle" in (tmp_path / "report.csv").read_text(encoding="utf-8")


def test_compare(pipeline: Dict[str, Path]) -> None:
    result = _invoke("compare", pipeline["report"], pipeline["report"])
    lines = result.output.splitlines()
    assert lines[0] == "policy,servers,count,mean,min,max"
    assert len(lines) == 1 + 5
    assert "fifo,1,6,1.0,1.0,1.0" in lines


def test_sweep_and_overhead(pipeline: Dict[str, Path]) -> None:
    result = _invoke(
        "sweep",
        pipeline["dataset"],
        pipeline["profiles"],
        "--counts",
        "2,4",
        "--queue-size",
        "8",
        "--repeats",
        "1",
    )
    assert [line.split(",")[0] for line in result.output.splitlines()[2:]] == ["2", "4"]

    result = _invoke(
        "overhead", pipeline["profiles"], pipeline["model"], "--sizes", "4,8", "--repeats", "1"
    )
    assert result.output.splitlines()[1] == "n_jobs,predict_time_s,blossom_time_s,greedy_time_s"
    assert [line.split(",")[0] for line in result.output.splitlines()[2:]] == ["4", "8"]


def test_config_file(pipeline: Dict[str, Path], tmp_path: Path) -> None:
    config = tmp_path / "colosched.yaml"
    config.write_text("estimators: 3\nfolds: 0\nseed: 5\n", encoding="utf-8")
    result = _invoke(
        "--config", config, "train", pipeline["dataset"], "-o", tmp_path / "model.json"
    )
    assert result.output.startswith("# colosched command=train seed=5")
    document = json.loads((tmp_path / "model.json").read_text(encoding="utf-8"))
    assert len(document["trees"]) == 3

    # An explicit flag wins over the file.
    _invoke(
        "--config",
        config,
        "train",
        pipeline["dataset"],
        "--estimators",
        "2",
        "-o",
        tmp_path / "model.json",
    )
    document = json.loads((tmp_path / "model.json").read_text(encoding="utf-8"))
    assert len(document["trees"]) == 2


ERROR_PARAMS: List[List[str]] = [
    ["--config", "{bad_config}", "synth"],
    ["schedule", "{unknown_queue}", "{profiles}", "--strategy", "di"],
    ["schedule", "{queue}", "{profiles}"],
    ["simulate", "{profiles}", "{oracle}", "--policies", "fifo,lottery"],
    ["train", "{dataset}", "--holdout", "1.5"],
]
ERROR_CODES = [
    "config_error: Unknown config key(s): colour",
    "schedule_error: Unresolved job nobody",
    "schedule_error: Strategy blossom needs a degradation predictor",
    "simulation_error: Unknown policy 'lottery'",
    "model_error: test_fraction must be in (0, 1)",
]


@pytest.mark.parametrize("args, message", zip(ERROR_PARAMS, ERROR_CODES))
def test_errors(
    pipeline: Dict[str, Path], tmp_path: Path, args: List[str], message: str
) -> None:
    bad_config = tmp_path / "bad.yaml"
    bad_config.write_text("colour: blue\n", encoding="utf-8")
    unknown_queue = tmp_path / "unknown.json"
    JobQueue(("app00", "nobody")).save(unknown_queue)
    values = {name: str(path) for name, path in pipeline.items()}
    values.update(bad_config=str(bad_config), unknown_queue=str(unknown_queue))

    result = _failure(*[arg.format(**values) for arg in args])
    assert message in result.output


def test_profile_errors_name_the_row(tmp_path: Path) -> None:
    profiles = profiles_csv(
        tmp_path / "profiles.csv", generic_rows("a", 100.0, skip=("cycles",))
    )
    colocations = tmp_path / "colocations.csv"
    colocations.write_text("primary_id,interfering_id,t_coloc_s\n", encoding="utf-8")
    result = _failure("dataset", profiles, colocations)
    assert "profile_error: " in result.output
    assert "a: missing counter cycles" in result.output


@pytest.mark.parametrize(
    "command, flags",
    [
        ("simulate", ["--policies", "--servers", "--level", "--perfect", "--charge-overhead"]),
        ("train", ["--estimators", "--max-features", "--holdout", "--folds", "--jobs"]),
        ("schedule", ["--model", "--strategy", "--counter-group", "--stat-mode"]),
    ],
)
def test_help_lists_flags(command: str, flags: List[str]) -> None:
    result = _invoke(command, "--help")
    for flag in flags:
        assert flag in result.output


@pytest.mark.parametrize("command", ["synth", "dataset", "schedule", "simulate"])
def test_help_describes_counter_groups(command: str) -> None:
    output = " ".join(_invoke(command, "--help").output.split())
    assert "--counter-group [all|generic]" in output
    assert "'generic'" in output and "'all'" in output
    if command != "synth":
        assert "--stat-mode [mean|full]" in output
        assert "'mean' uses counter means only" in output
