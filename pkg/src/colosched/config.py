from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import yaml

from .errors import ColocationError, ConfigError
from .forest import ForestHyperparams
from .profiles import CounterGroup, FeatureSet, StatMode
from .simulator import ClusterConfig, parse_policies
from .workload import Level, SynthConfig


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a pipeline run as a flat mapping.

    Keys double as CLI parameter names, so a config file pre-fills the flags of every
    subcommand and explicit flags still win."""

    counter_group: str = CounterGroup.GENERIC.value
    stat_mode: str = StatMode.MEAN.value
    max_features: str = "sqrt"
    min_samples_split: int = 2
    bootstrap: bool = True
    estimators: int = 22
    seed: int = 0
    holdout: float = 0.3
    folds: int = 5
    budget: int = 20
    servers: int = 1
    jobs_per_server_scale: int = 1
    queues: int = 20
    queue_size: int = 50
    level: Optional[str] = None
    policies: str = "fifo,fifo-shared,di,blossom,greedy"
    jobs: int = 1
    n_apps: int = 32
    base_pct: float = 0.0
    sensitivity_pct: float = 10.0
    pressure_pct: float = 25.0
    interaction_pct: float = 60.0
    interaction_exponent: float = 1.0
    noise: float = 0.05

    def __post_init__(self) -> None:
        # Build every derived object once so bad values fail at load time.
        try:
            self.feature_set()
            self.hyperparams()
            self.cluster()
            parse_policies(self.policies)
            self.queue_level()
        except ColocationError as e:
            raise ConfigError(str(e)) from None
        if not 0 < self.holdout < 1:
            raise ConfigError(f"holdout must be in (0, 1), got {self.holdout}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

    def feature_set(self) -> FeatureSet:
        try:
            return FeatureSet(CounterGroup(self.counter_group), StatMode(self.stat_mode))
        except ValueError:
            raise ConfigError(
                f"Invalid feature set {self.counter_group}/{self.stat_mode}"
            ) from None

    def hyperparams(self) -> ForestHyperparams:
        return ForestHyperparams(
            n_estimators=self.estimators,
            max_features=self.max_features,
            min_samples_split=self.min_samples_split,
            bootstrap=self.bootstrap,
            seed=self.seed,
        )

    def cluster(self) -> ClusterConfig:
        return ClusterConfig(self.servers, self.jobs_per_server_scale)

    def queue_level(self) -> Optional[Level]:
        if self.level is None:
            return None
        try:
            return Level(self.level.lower())
        except ValueError:
            raise ConfigError(f"Invalid level {self.level!r}, expected low/medium/high") from None

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            base_pct=self.base_pct,
            sensitivity_pct=self.sensitivity_pct,
            pressure_pct=self.pressure_pct,
            interaction_pct=self.interaction_pct,
            interaction_exponent=self.interaction_exponent,
            noise=self.noise,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> RunConfig:
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")

        values: Dict[str, Any] = {}
        defaults = cls()
        for key, value in data.items():
            default = getattr(defaults, key)
            values[key] = _coerce(key, value, default)
        return cls(**values)

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> RunConfig:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}") from None
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}") from None
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a flat mapping of keys to values")
        return cls.from_dict(data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    def default_map(self, commands: Iterable[str]) -> Dict[str, Dict[str, Any]]:
        """click default_map giving every subcommand the same flat values."""

        values = self.to_dict()
        return {command: dict(values) for command in commands}


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Check a config value against the type of its default."""

    if key == "level":
        if value is None or isinstance(value, str):
            return value
    elif key == "max_features":
        # A bare fraction is read by YAML as a float.
        if isinstance(value, (str, float, int)) and not isinstance(value, bool):
            return str(value)
    elif isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    raise ConfigError(f"Invalid value for {key}: {value!r}")
