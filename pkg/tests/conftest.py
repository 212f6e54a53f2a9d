from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import pytest

from colosched.forest import ForestHyperparams
from colosched.model import DegradationModel, train_forest
from colosched.profiles import (
    GENERIC_COUNTERS,
    ApplicationProfile,
    ColocationSample,
    CounterStat,
    FeatureSet,
    build_training_dataset,
    index_profiles,
)
from colosched.workload import DegradationOracle, SynthConfig, synth_workload

SEED = 7
N_APPS = 32

GENERIC_MEAN = FeatureSet()

# Every pair degrades by well over 100 %, so colocating anything is worse than FIFO.
HEAVY = SynthConfig(base_pct=250.0)
# High-miss pairs degrade superlinearly while mixed pairs barely interfere.
SUPERLINEAR = SynthConfig(
    sensitivity_pct=5.0, pressure_pct=5.0, interaction_pct=300.0, interaction_exponent=2.0
)

Profiles = Dict[str, ApplicationProfile]
ProfileRow = Tuple[str, float, str, float, float, float, float]
Workload = Tuple[Profiles, DegradationOracle]

PROFILES_CSV_HEADER = "app_id,t_alone_s,counter,mean,min,max,sd\n"


def make_profile(app_id: str, t_alone: float, **means: float) -> ApplicationProfile:
    """Generic-subset profile whose counters default to 1.0 unless overridden."""

    counters = {
        counter: CounterStat.from_mean(means.get(counter, 1.0)) for counter in GENERIC_COUNTERS
    }
    return ApplicationProfile(app_id, t_alone, counters).with_derived()


def make_oracle(
    t_alone: Mapping[str, float], degradations: Optional[Mapping[Tuple[str, str], float]] = None
) -> DegradationOracle:
    """Oracle over every ordered pair (diagonal included), 0 % unless listed."""

    matrix = {(a, b): 0.0 for a in t_alone for b in t_alone}
    matrix.update(degradations or {})
    return DegradationOracle(matrix, dict(t_alone))


def profiles_csv(path: Path, rows: List[ProfileRow]) -> Path:
    lines = [PROFILES_CSV_HEADER]
    lines += [",".join(str(value) for value in row) + "\n" for row in rows]
    path.write_text("".join(lines), encoding="utf-8")
    return path


def generic_rows(app_id: str, t_alone: float, skip: Tuple[str, ...] = ()) -> List[ProfileRow]:
    return [
        (app_id, t_alone, counter, 10.0, 9.0, 11.0, 0.5)
        for counter in GENERIC_COUNTERS
        if counter not in skip
    ]


@pytest.fixture(scope="session")
def workload() -> Workload:
    profiles, oracle = synth_workload(N_APPS, SEED)
    return index_profiles(profiles), oracle


@pytest.fixture(scope="session")
def samples(workload: Workload) -> List[ColocationSample]:
    profiles, oracle = workload
    return build_training_dataset(profiles, oracle.measurements(), GENERIC_MEAN)


def learned_model(
    profiles: Mapping[str, ApplicationProfile], oracle: DegradationOracle
) -> DegradationModel:
    dataset = build_training_dataset(profiles, oracle.measurements(), GENERIC_MEAN)
    return train_forest(dataset, ForestHyperparams(seed=SEED), GENERIC_MEAN)


@pytest.fixture(scope="session")
def model(samples: List[ColocationSample]) -> DegradationModel:
    return train_forest(samples, ForestHyperparams(seed=SEED), GENERIC_MEAN)
