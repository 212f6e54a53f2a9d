from pathlib import Path
from typing import Any, Dict

import pytest

from colosched.config import RunConfig
from colosched.errors import ConfigError
from colosched.forest import ForestHyperparams
from colosched.profiles import CounterGroup, FeatureSet, StatMode
from colosched.workload import Level


def test_defaults() -> None:
    config = RunConfig()
    assert config.feature_set() == FeatureSet(CounterGroup.GENERIC, StatMode.MEAN)
    assert config.hyperparams() == ForestHyperparams(n_estimators=22, seed=0)
    assert config.queue_level() is None
    assert config.cluster().n_servers == 1


def test_yaml_round_trip(tmp_path: Path) -> None:
    config = RunConfig(estimators=7, level="High", max_features="0.5", holdout=0.25)
    path = tmp_path / "colosched.yaml"
    path.write_text(config.to_yaml(), encoding="utf-8")
    assert RunConfig.from_yaml(path) == config
    assert config.queue_level() is Level.HIGH


def test_empty_file_is_default(tmp_path: Path) -> None:
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    assert RunConfig.from_yaml(path) == RunConfig()


def test_coercion() -> None:
    config = RunConfig.from_dict({"max_features": 0.5, "holdout": 1 / 4, "noise": 0})
    assert config.max_features == "0.5"
    assert config.noise == 0.0
    assert isinstance(config.noise, float)


ERROR_PARAMS: Dict[str, Dict[str, Any]] = {
    "Unknown config key\\(s\\): colour, size": {"colour": "blue", "size": 3},
    "Invalid value for estimators: 'many'": {"estimators": "many"},
    "Invalid value for bootstrap: 1": {"bootstrap": 1},
    "Invalid value for seed: True": {"seed": True},
    "holdout must be in": {"holdout": 1.0},
    "Invalid feature set loud/mean": {"counter_group": "loud"},
    "Invalid level 'extreme'": {"level": "extreme"},
    "n_estimators must be >= 1": {"estimators": 0},
    "Unknown policy 'lottery'": {"policies": "fifo,lottery"},
    "jobs must be >= 1": {"jobs": 0},
}


@pytest.mark.parametrize("message, data", ERROR_PARAMS.items())
def test_invalid_values(message: str, data: Dict[str, Any]) -> None:
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_dict(data)


@pytest.mark.parametrize(
    "content, message",
    [("- estimators\n- 3\n", "flat mapping"), ("estimators: [1\n", "invalid YAML")],
)
def test_invalid_files(tmp_path: Path, content: str, message: str) -> None:
    path = tmp_path / "colosched.yaml"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_yaml(path)


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        RunConfig.from_yaml(tmp_path / "absent.yaml")


def test_default_map() -> None:
    default_map = RunConfig(seed=4).default_map(["train", "simulate"])
    assert set(default_map) == {"train", "simulate"}
    assert default_map["train"] == default_map["simulate"]
    assert default_map["train"]["seed"] == 4
    assert default_map["train"] is not default_map["simulate"]
