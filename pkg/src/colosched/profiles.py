from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from .errors import DatasetError, ProfileError

logger = logging.getLogger(__name__)

STATS = ("mean", "min", "max", "sd")
CPU_USAGE = "CPU_usage"

# Generic counters available on every modern architecture, plus the CPU_usage column.
GENERIC_COUNTERS = (
    "branch_instructions",
    "branch_misses",
    "cache_misses",
    "cache_references",
    "context_switches",
    "cpu_migrations",
    "cycles",
    "instructions",
    "page_faults",
    CPU_USAGE,
)

ALL_COUNTERS = GENERIC_COUNTERS + (
    "resource_stalls.any",
    "stalled_cycles_frontend",
    "stalled_cycles_backend",
    "LLC_prefetches",
    "LLC_prefetch_misses",
    "l2_rqsts.demand_data_rd_hit",
    "l2_rqsts.pf_hit",
    "l2_l1d_wb_rqsts.miss",
    "l2_lines_out.pf_clean",
    "l2_lines_out.pf_dirty",
    "l2_rqsts.all_pf",
    "l1d.allocated_in_m",
    "l2_lines_out.demand_clean",
    "l1d.eviction",
    "l2_rqsts.all_demand_data_rd",
    "l2_lines_in.all",
    "L1_dcache_store_misses",
    "L1_dcache_load_misses",
    "L1_dcache_loads",
    "L1_dcache_prefetch_misses",
    "l1d.replacement",
    "mem_uops_retired.all_stores",
    "mem_uops_retired.all_loads",
    "mem_load_uops_retired.llc_miss",
    "mem_load_uops_retired.llc_hit",
)

IPC = "IPC"
CACHE_REF_PER_INSTRUCTIONS = "cache_ref_per_instructions"
CACHE_MISSES_PER_INSTRUCTIONS = "cache_misses_per_instructions"
MISS_RATIO = "miss_ratio"
COMPUTED_METRICS = (
    CACHE_MISSES_PER_INSTRUCTIONS,
    CACHE_REF_PER_INSTRUCTIONS,
    IPC,
    MISS_RATIO,
)

PROFILE_COLUMNS = ["app_id", "t_alone_s", "counter", "mean", "min", "max", "sd"]
MEASUREMENT_COLUMNS = ["primary_id", "interfering_id", "t_coloc_s"]
DATASET_HEADER = "# colosched dataset"


class CounterGroup(Enum):
    ALL = "all"
    GENERIC = "generic"


class StatMode(Enum):
    MEAN = "mean"
    FULL = "full"


@dataclass(frozen=True)
class FeatureSet:
    """Which counters and statistics describe an application in a feature vector."""

    counter_group: CounterGroup = CounterGroup.GENERIC
    stat_mode: StatMode = StatMode.MEAN

    @classmethod
    def parse(cls, token: str) -> FeatureSet:
        """Parse the `<counter_group>/<stat_mode>` form, e.g. `generic/mean`."""

        try:
            group, mode = token.strip().split("/")
            return cls(CounterGroup(group), StatMode(mode))
        except ValueError:
            raise ProfileError(f"Invalid feature set: {token!r}") from None

    def __str__(self) -> str:
        return f"{self.counter_group.value}/{self.stat_mode.value}"

    @property
    def counters(self) -> Tuple[str, ...]:
        if self.counter_group == CounterGroup.ALL:
            return tuple(sorted(ALL_COUNTERS))
        return tuple(sorted(GENERIC_COUNTERS))

    @property
    def stats(self) -> Tuple[str, ...]:
        return STATS if self.stat_mode == StatMode.FULL else STATS[:1]

    @property
    def derived(self) -> Tuple[str, ...]:
        # The generic subset only carries CPU_usage, which is already a counter column.
        if self.counter_group == CounterGroup.ALL:
            return COMPUTED_METRICS
        return ()

    def app_feature_names(self) -> List[str]:
        names = [f"{counter}.{stat}" for counter in self.counters for stat in self.stats]
        return names + list(self.derived)

    def feature_names(self) -> List[str]:
        app_names = self.app_feature_names()
        return [f"primary.{name}" for name in app_names] + [
            f"interfering.{name}" for name in app_names
        ]

    @property
    def n_features(self) -> int:
        return 2 * len(self.app_feature_names())


@dataclass(frozen=True)
class CounterStat:

    mean: float
    min: float
    max: float
    sd: float

    def __post_init__(self) -> None:
        if not self.min <= self.mean <= self.max:
            raise ProfileError(
                f"Counter statistics violate min <= mean <= max: "
                f"{self.min} <= {self.mean} <= {self.max}"
            )
        if self.sd < 0:
            raise ProfileError(f"Negative standard deviation: {self.sd}")

    @classmethod
    def from_mean(cls, mean: float) -> CounterStat:
        return cls(mean=mean, min=mean, max=mean, sd=mean)


@dataclass(frozen=True)
class ApplicationProfile:

    app_id: str
    t_alone: float
    counters: Mapping[str, CounterStat]
    derived: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.t_alone > 0:
            raise ProfileError(f"{self.app_id}: t_alone must be positive, got {self.t_alone}")

    def counter_mean(self, counter: str) -> float:
        try:
            return self.counters[counter].mean
        except KeyError:
            raise ProfileError(f"{self.app_id}: missing counter {counter}") from None

    def with_derived(self) -> ApplicationProfile:
        return ApplicationProfile(self.app_id, self.t_alone, self.counters, derive_metrics(self))

    def features(self, feature_set: FeatureSet) -> List[float]:
        """Return this application's half of a feature vector, in the feature set's order."""

        values: List[float] = []
        for counter in feature_set.counters:
            try:
                stat = self.counters[counter]
            except KeyError:
                raise ProfileError(
                    f"{self.app_id}: missing counter {counter} for feature set {feature_set}"
                ) from None
            values.extend(float(getattr(stat, name)) for name in feature_set.stats)
        for metric in feature_set.derived:
            try:
                values.append(float(self.derived[metric]))
            except KeyError:
                raise ProfileError(
                    f"{self.app_id}: missing derived metric {metric} for feature set {feature_set}"
                ) from None
        return values


@dataclass(frozen=True)
class ColocationMeasurement:

    primary_id: str
    interfering_id: str
    t_coloc: float

    def __post_init__(self) -> None:
        if not self.t_coloc > 0:
            raise ProfileError(
                f"{self.primary_id}/{self.interfering_id}: t_coloc must be positive, "
                f"got {self.t_coloc}"
            )


@dataclass(frozen=True)
class ColocationSample:

    features: Tuple[float, ...]
    degradation: float
    primary_id: str
    interfering_id: str


def compute_degradation(t_alone: float, t_coloc: float) -> float:
    """Percentage increase of a runtime when colocated, relative to running alone.

    The result is not clamped: faster colocated runs give negative values."""

    if not (t_alone > 0 and t_coloc > 0):
        raise ProfileError(f"Runtimes must be positive: t_alone={t_alone}, t_coloc={t_coloc}")
    return 100.0 * (t_coloc - t_alone) / t_alone


def _ratio(profile: ApplicationProfile, numerator: str, denominator: str) -> float:
    value = profile.counter_mean(denominator)
    if value == 0:
        raise ProfileError(f"{profile.app_id}: {denominator} mean is zero")
    return profile.counter_mean(numerator) / value


def derive_metrics(profile: ApplicationProfile) -> Dict[str, float]:
    derived = {
        IPC: _ratio(profile, "instructions", "cycles"),
        CACHE_REF_PER_INSTRUCTIONS: _ratio(profile, "cache_references", "instructions"),
        CACHE_MISSES_PER_INSTRUCTIONS: _ratio(profile, "cache_misses", "instructions"),
        MISS_RATIO: _ratio(profile, "cache_misses", "cache_references"),
    }
    if CPU_USAGE in profile.counters:
        derived[CPU_USAGE] = profile.counters[CPU_USAGE].mean
    return derived


def _read_csv(path: Union[str, Path], required: Sequence[str], error: type) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            path,
            comment="#",
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except FileNotFoundError:
        raise error(f"File not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise error(f"{path}: malformed file: {e}") from None

    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise error(f"{path}: missing column(s) {', '.join(missing)}")
    return frame


def csv_records(
    path: Union[str, Path], frame: pd.DataFrame
) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """Pair every record of `frame` with its 1-based line in the file at `path`.

    Blank lines and `#` comment lines do not hold records, so they are skipped the same
    way `pandas.read_csv` skips them."""

    with open(path, encoding="utf-8") as f:
        lines = [number for number, line in enumerate(f, 1) if line.split("#", 1)[0].strip()]
    records = frame.to_dict("records")
    # A record spanning several lines (quoted newline) falls back to its record position.
    if len(lines) != len(records) + 1:
        lines = list(range(1, len(records) + 2))
    for line, record in zip(lines[1:], records):
        yield line, record


def _parse_real(value: str, path: Union[str, Path], row: int, column: str, error: type) -> float:
    try:
        return float(value)
    except ValueError:
        raise error(f"{path}: row {row}: invalid {column} value {value!r}") from None


def parse_profiles(path: Union[str, Path], feature_set: FeatureSet) -> List[ApplicationProfile]:
    """Read application profiles from the long `profiles.csv` format.

    Each row holds one (application, counter) statistic. Under the mean-only stat mode the
    min/max/sd columns may be absent and the mean is stored into every statistic slot."""

    full = feature_set.stat_mode == StatMode.FULL
    required = PROFILE_COLUMNS if full else PROFILE_COLUMNS[:4]
    frame = _read_csv(path, required, ProfileError)

    runtimes: Dict[str, float] = {}
    counters: Dict[str, Dict[str, CounterStat]] = {}
    for row, record in csv_records(path, frame):
        app_id = str(record["app_id"]).strip()
        counter = str(record["counter"]).strip()
        if not app_id or not counter:
            raise ProfileError(f"{path}: row {row}: empty app_id or counter")

        t_alone = _parse_real(record["t_alone_s"], path, row, "t_alone_s", ProfileError)
        if not t_alone > 0:
            raise ProfileError(f"{path}: row {row}: {app_id}: t_alone_s must be positive")
        if runtimes.setdefault(app_id, t_alone) != t_alone:
            raise ProfileError(f"{path}: row {row}: {app_id}: inconsistent t_alone_s")

        mean = _parse_real(record["mean"], path, row, "mean", ProfileError)
        try:
            if full:
                stat = CounterStat(
                    mean=mean,
                    min=_parse_real(record["min"], path, row, "min", ProfileError),
                    max=_parse_real(record["max"], path, row, "max", ProfileError),
                    sd=_parse_real(record["sd"], path, row, "sd", ProfileError),
                )
            else:
                stat = CounterStat.from_mean(mean)
        except ProfileError as e:
            raise ProfileError(f"{path}: row {row}: {app_id}/{counter}: {e}") from None

        app_counters = counters.setdefault(app_id, {})
        if counter in app_counters:
            raise ProfileError(f"{path}: row {row}: duplicate app_id {app_id} for {counter}")
        app_counters[counter] = stat

    profiles = []
    for app_id, app_counters in counters.items():
        declared = {}
        for counter in feature_set.counters:
            if counter not in app_counters:
                raise ProfileError(
                    f"{path}: {app_id}: missing counter {counter} for feature set {feature_set}"
                )
            declared[counter] = app_counters[counter]
        ignored = sorted(set(app_counters) - set(declared))
        if ignored:
            logger.debug("%s: ignoring counters outside %s: %s", app_id, feature_set, ignored)
        profile = ApplicationProfile(app_id, runtimes[app_id], declared)
        profiles.append(profile.with_derived())

    logger.info("Parsed %d profiles from %s", len(profiles), path)
    return profiles


def write_profiles(profiles: Iterable[ApplicationProfile], path: Union[str, Path]) -> None:
    rows = [
        (profile.app_id, profile.t_alone, counter, stat.mean, stat.min, stat.max, stat.sd)
        for profile in profiles
        for counter, stat in sorted(profile.counters.items())
    ]
    frame = pd.DataFrame(rows, columns=PROFILE_COLUMNS)
    frame.to_csv(path, index=False, lineterminator="\n")


def parse_measurements(path: Union[str, Path]) -> List[ColocationMeasurement]:
    frame = _read_csv(path, MEASUREMENT_COLUMNS, ProfileError)
    measurements = []
    for row, record in csv_records(path, frame):
        t_coloc = _parse_real(record["t_coloc_s"], path, row, "t_coloc_s", ProfileError)
        try:
            measurements.append(
                ColocationMeasurement(
                    str(record["primary_id"]).strip(),
                    str(record["interfering_id"]).strip(),
                    t_coloc,
                )
            )
        except ProfileError as e:
            raise ProfileError(f"{path}: row {row}: {e}") from None
    return measurements


def write_measurements(
    measurements: Iterable[ColocationMeasurement], path: Union[str, Path]
) -> None:
    rows = [(m.primary_id, m.interfering_id, m.t_coloc) for m in measurements]
    pd.DataFrame(rows, columns=MEASUREMENT_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def index_profiles(profiles: Iterable[ApplicationProfile]) -> Dict[str, ApplicationProfile]:
    indexed: Dict[str, ApplicationProfile] = {}
    for profile in profiles:
        if profile.app_id in indexed:
            raise ProfileError(f"Duplicate app_id {profile.app_id}")
        indexed[profile.app_id] = profile
    return indexed


def pair_features(
    primary: ApplicationProfile, interfering: ApplicationProfile, feature_set: FeatureSet
) -> Tuple[float, ...]:
    return tuple(primary.features(feature_set) + interfering.features(feature_set))


def build_training_dataset(
    profiles: Union[Mapping[str, ApplicationProfile], Iterable[ApplicationProfile]],
    measurements: Iterable[ColocationMeasurement],
    feature_set: FeatureSet,
) -> List[ColocationSample]:
    """Turn colocation measurements into training samples.

    Every measurement gives one directional sample; negative degradations (the
    colocated run was faster than the solo run) are clamped to 0."""

    by_id = dict(profiles) if isinstance(profiles, Mapping) else index_profiles(profiles)
    cache: Dict[str, List[float]] = {}

    def features_of(app_id: str) -> List[float]:
        if app_id not in cache:
            try:
                cache[app_id] = by_id[app_id].features(feature_set)
            except KeyError:
                raise DatasetError(f"Unresolved app_id {app_id}") from None
        return cache[app_id]

    samples = []
    clamped = 0
    for measurement in measurements:
        primary = features_of(measurement.primary_id)
        interfering = features_of(measurement.interfering_id)
        degradation = compute_degradation(
            by_id[measurement.primary_id].t_alone, measurement.t_coloc
        )
        if degradation < 0:
            clamped += 1
            degradation = 0.0
        samples.append(
            ColocationSample(
                tuple(primary + interfering),
                degradation,
                measurement.primary_id,
                measurement.interfering_id,
            )
        )

    if clamped:
        logger.info("Clamped %d negative degradation(s) to 0", clamped)
    return samples


def count_clamped(
    profiles: Mapping[str, ApplicationProfile], measurements: Iterable[ColocationMeasurement]
) -> int:
    return sum(
        1
        for m in measurements
        if m.primary_id in profiles and m.t_coloc < profiles[m.primary_id].t_alone
    )


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_dataset(
    samples: Sequence[ColocationSample],
    feature_set: FeatureSet,
    path: Union[str, Path],
    provenance: Optional[Mapping[str, str]] = None,
) -> None:
    """Write samples as CSV preceded by `#` provenance lines (feature set, input hashes)."""

    columns = ["primary_id", "interfering_id", "degradation_pct"] + feature_set.feature_names()
    rows = [
        [sample.primary_id, sample.interfering_id, sample.degradation, *sample.features]
        for sample in samples
    ]
    header = [DATASET_HEADER, f"# feature_set: {feature_set}"]
    header += [f"# {key}: {value}" for key, value in sorted((provenance or {}).items())]
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(header) + "\n")
        pd.DataFrame(rows, columns=columns).to_csv(f, index=False, lineterminator="\n")


def read_dataset(path: Union[str, Path]) -> Tuple[FeatureSet, List[ColocationSample]]:
    feature_set: Optional[FeatureSet] = None
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].partition(":")
                if key.strip() == "feature_set":
                    feature_set = FeatureSet.parse(value)
    except FileNotFoundError:
        raise DatasetError(f"File not found: {path}") from None
    if feature_set is None:
        raise DatasetError(f"{path}: missing feature_set header line")

    frame = _read_csv(path, ["primary_id", "interfering_id", "degradation_pct"], DatasetError)
    names = feature_set.feature_names()
    if list(frame.columns[3:]) != names:
        raise DatasetError(f"{path}: feature columns do not match feature set {feature_set}")

    samples = []
    for row, record in csv_records(path, frame):
        features = tuple(_parse_real(record[n], path, row, n, DatasetError) for n in names)
        degradation = _parse_real(
            record["degradation_pct"], path, row, "degradation_pct", DatasetError
        )
        samples.append(
            ColocationSample(
                features, degradation, str(record["primary_id"]), str(record["interfering_id"])
            )
        )
    return feature_set, samples
