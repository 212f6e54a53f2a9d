from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ProfileError, SimulationError
from .profiles import (
    CPU_USAGE,
    ApplicationProfile,
    ColocationMeasurement,
    CounterGroup,
    CounterStat,
    compute_degradation,
    csv_records,
)
from .scheduler import JobQueue, pair_runtime

logger = logging.getLogger(__name__)

ORACLE_COLUMNS = ["primary_id", "interfering_id", "degradation_pct"]

CORES = 16
CLOCK_HZ = 2.6e9


@dataclass(frozen=True)
class DegradationOracle:
    """True degradation (%) of every ordered application pair plus solo runtimes.

    It also answers `predict`, so it can stand in for a perfect model."""

    matrix: Mapping[Tuple[str, str], float]
    t_alone: Mapping[str, float]
    # Colocated runtimes the degradations were computed from, when known.
    coloc_runtimes: Mapping[Tuple[str, str], float] = field(default_factory=dict)

    @property
    def app_ids(self) -> List[str]:
        return sorted(self.t_alone)

    def degradation(self, primary_id: str, interfering_id: str) -> float:
        try:
            return self.matrix[(primary_id, interfering_id)]
        except KeyError:
            raise SimulationError(
                f"Oracle does not cover the pair {primary_id}/{interfering_id}"
            ) from None

    def runtime(self, app_id: str) -> float:
        try:
            return self.t_alone[app_id]
        except KeyError:
            raise SimulationError(f"Oracle does not cover application {app_id}") from None

    def pair_runtime(self, a: str, b: str) -> float:
        return pair_runtime(
            self.runtime(a), self.runtime(b), self.degradation(a, b), self.degradation(b, a)
        )

    def predict(self, primary: ApplicationProfile, interfering: ApplicationProfile) -> float:
        return self.degradation(primary.app_id, interfering.app_id)

    def check_covers(self, app_ids: Iterable[str]) -> None:
        for app_id in app_ids:
            self.runtime(app_id)

    def measurements(self) -> List[ColocationMeasurement]:
        """Colocated runtimes implied by the oracle, one per ordered pair of distinct apps."""

        measurements = []
        for a in self.app_ids:
            for b in self.app_ids:
                if a == b or (a, b) not in self.matrix:
                    continue
                t_coloc = self.coloc_runtimes.get((a, b))
                if t_coloc is None:
                    t_coloc = self.t_alone[a] * (1 + self.matrix[(a, b)] / 100.0)
                measurements.append(ColocationMeasurement(a, b, t_coloc))
        return measurements

    def save(self, path: Union[str, Path]) -> None:
        rows = [(a, b, degradation) for (a, b), degradation in sorted(self.matrix.items())]
        frame = pd.DataFrame(rows, columns=ORACLE_COLUMNS)
        frame.to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def load(
        cls, path: Union[str, Path], profiles: Mapping[str, ApplicationProfile]
    ) -> DegradationOracle:
        try:
            frame = pd.read_csv(path, comment="#", dtype=str, keep_default_na=False)
        except FileNotFoundError:
            raise SimulationError(f"Oracle file not found: {path}") from None
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise SimulationError(f"{path}: malformed oracle file: {e}") from None
        if list(frame.columns) != ORACLE_COLUMNS:
            raise SimulationError(f"{path}: expected columns {', '.join(ORACLE_COLUMNS)}")

        matrix = {}
        for row, record in csv_records(path, frame):
            try:
                degradation = float(record["degradation_pct"])
            except ValueError:
                raise SimulationError(f"{path}: row {row}: invalid degradation") from None
            if degradation < 0:
                raise SimulationError(f"{path}: row {row}: negative degradation")
            matrix[(record["primary_id"], record["interfering_id"])] = degradation
        return cls(matrix, {app_id: profile.t_alone for app_id, profile in profiles.items()})


@dataclass(frozen=True)
class SynthConfig:
    """Shape of the planted degradation function.

    Every application gets a memory pressure p in [0, 1] which drives its cache counters.
    The primary i suffers
    `base + sensitivity * p_i + pressure * p_j + interaction * (p_i * p_j) ** exponent`
    percent next to j, scaled by a uniform jitter of +/- `noise` and clamped at 0."""

    base_pct: float = 0.0
    sensitivity_pct: float = 10.0
    pressure_pct: float = 25.0
    interaction_pct: float = 60.0
    interaction_exponent: float = 1.0
    noise: float = 0.05
    runs: int = 5
    t_alone_min: float = 100.0
    t_alone_max: float = 400.0

    def degradation(self, p_primary: float, p_interfering: float, jitter: float) -> float:
        planted: float = (
            self.base_pct
            + self.sensitivity_pct * p_primary
            + self.pressure_pct * p_interfering
            + self.interaction_pct * (p_primary * p_interfering) ** self.interaction_exponent
        )
        return max(0.0, planted * (1.0 + jitter))


def _counter_stat(rng: np.random.Generator, total: float, runs: int) -> CounterStat:
    samples = total * (1.0 + rng.normal(0.0, 0.01, runs))
    low, high = float(samples.min()), float(samples.max())
    mean = min(max(float(samples.mean()), low), high)
    sd = float(samples.std(ddof=1)) if runs > 1 else 0.0
    return CounterStat(mean=mean, min=low, max=high, sd=sd)


def _architecture_totals(
    rng: np.random.Generator, p: float, totals: Mapping[str, float]
) -> Dict[str, float]:
    """Architecture-specific counter totals derived from the generic ones and pressure p."""

    cycles, instructions = totals["cycles"], totals["instructions"]
    references, misses = totals["cache_references"], totals["cache_misses"]
    loads = instructions * rng.uniform(0.25, 0.35)
    stores = instructions * rng.uniform(0.08, 0.14)
    l1_misses = loads * (0.01 + 0.09 * p) * rng.uniform(0.9, 1.1)
    l2_demand = l1_misses * rng.uniform(0.8, 1.0)
    prefetches = references * (0.2 + 0.3 * p) * rng.uniform(0.9, 1.1)
    extra = {
        "resource_stalls.any": cycles * (0.1 + 0.5 * p) * rng.uniform(0.9, 1.1),
        "stalled_cycles_frontend": cycles * rng.uniform(0.05, 0.15),
        "stalled_cycles_backend": cycles * (0.1 + 0.4 * p) * rng.uniform(0.9, 1.1),
        "LLC_prefetches": prefetches,
        "LLC_prefetch_misses": prefetches * (0.05 + 0.6 * p),
        "l2_rqsts.demand_data_rd_hit": l2_demand * (0.9 - 0.6 * p),
        "l2_rqsts.pf_hit": prefetches * rng.uniform(0.3, 0.6),
        "l2_l1d_wb_rqsts.miss": stores * (0.005 + 0.03 * p),
        "l2_lines_out.pf_clean": prefetches * rng.uniform(0.1, 0.3),
        "l2_lines_out.pf_dirty": prefetches * rng.uniform(0.01, 0.05),
        "l2_rqsts.all_pf": prefetches * rng.uniform(1.0, 1.3),
        "l1d.allocated_in_m": stores * rng.uniform(0.02, 0.08),
        "l2_lines_out.demand_clean": l2_demand * (0.2 + 0.5 * p),
        "l1d.eviction": l1_misses * rng.uniform(0.3, 0.6),
        "l2_rqsts.all_demand_data_rd": l2_demand,
        "l2_lines_in.all": l2_demand * (0.3 + 0.6 * p) + prefetches * 0.1,
        "L1_dcache_store_misses": stores * (0.005 + 0.05 * p),
        "L1_dcache_load_misses": l1_misses,
        "L1_dcache_loads": loads,
        "L1_dcache_prefetch_misses": l1_misses * rng.uniform(0.05, 0.2),
        "l1d.replacement": l1_misses * rng.uniform(0.95, 1.05),
        "mem_uops_retired.all_stores": stores,
        "mem_uops_retired.all_loads": loads,
        "mem_load_uops_retired.llc_miss": misses * rng.uniform(0.6, 0.9),
        "mem_load_uops_retired.llc_hit": (references - misses) * rng.uniform(0.6, 0.9),
    }
    return {name: max(0.0, float(total)) for name, total in extra.items()}


def synth_workload(
    n_apps: int,
    seed: int,
    config: SynthConfig = SynthConfig(),
    counter_group: CounterGroup = CounterGroup.GENERIC,
) -> Tuple[List[ApplicationProfile], DegradationOracle]:
    """Generate application profiles and a matching degradation oracle.

    The generic group emits only the counters every architecture has; the all group adds
    the architecture-specific ones, drawn from a separate generator so the generic
    counters and the oracle do not depend on the group.

    Oracle degradations are recomputed from the colocated runtimes they imply, so a
    dataset built from `oracle.measurements()` reproduces them exactly."""

    if n_apps < 2:
        raise ProfileError(f"n_apps must be >= 2, got {n_apps}")
    logger.info("Synthesizing %d applications, seed %d, %s", n_apps, seed, asdict(config))

    rng = np.random.default_rng(seed)
    extra_rng = np.random.default_rng([seed, 1])
    pressure = rng.uniform(0.0, 1.0, n_apps)
    runtimes = rng.uniform(config.t_alone_min, config.t_alone_max, n_apps)
    app_ids = [f"app{i:02d}" for i in range(n_apps)]

    profiles = []
    for app_id, p, t_alone in zip(app_ids, pressure, runtimes):
        ipc = max(0.2, 2.2 - 1.4 * p + rng.normal(0.0, 0.05))
        cycles = CORES * CLOCK_HZ * t_alone
        instructions = cycles * ipc
        cache_references = instructions * (0.005 + 0.045 * p) * rng.uniform(0.9, 1.1)
        cache_misses = cache_references * (0.05 + 0.75 * p) * rng.uniform(0.9, 1.1)
        branch_instructions = instructions * rng.uniform(0.08, 0.22)
        totals = {
            "cycles": cycles,
            "instructions": instructions,
            "cache_references": cache_references,
            "cache_misses": cache_misses,
            "branch_instructions": branch_instructions,
            "branch_misses": branch_instructions * rng.uniform(0.002, 0.04),
            "page_faults": t_alone * (200 + 5000 * p) * rng.uniform(0.8, 1.2),
            "context_switches": t_alone * rng.uniform(50, 500),
            "cpu_migrations": t_alone * rng.uniform(1, 40),
            CPU_USAGE: 100.0 * (1.0 - 0.3 * p) * rng.uniform(0.97, 1.0),
        }
        counters = {
            name: _counter_stat(rng, total, config.runs) for name, total in sorted(totals.items())
        }
        if counter_group == CounterGroup.ALL:
            extra = _architecture_totals(extra_rng, float(p), totals)
            counters.update(
                (name, _counter_stat(extra_rng, total, config.runs))
                for name, total in sorted(extra.items())
            )
        profile = ApplicationProfile(app_id, float(t_alone), counters)
        profiles.append(profile.with_derived())

    jitter = rng.uniform(-config.noise, config.noise, (n_apps, n_apps))
    matrix: Dict[Tuple[str, str], float] = {}
    coloc_runtimes: Dict[Tuple[str, str], float] = {}
    for i, primary in enumerate(app_ids):
        for j, interfering in enumerate(app_ids):
            planted = config.degradation(pressure[i], pressure[j], jitter[i, j])
            t_coloc = float(runtimes[i]) * (1.0 + planted / 100.0)
            coloc_runtimes[(primary, interfering)] = t_coloc
            matrix[(primary, interfering)] = max(
                0.0, compute_degradation(float(runtimes[i]), t_coloc)
            )

    oracle = DegradationOracle(
        matrix, {p.app_id: p.t_alone for p in profiles}, coloc_runtimes
    )
    return profiles, oracle


def generate_random_queue(app_ids: Sequence[str], size: int, seed: int) -> JobQueue:
    """Uniform draws with replacement."""

    if not app_ids:
        raise SimulationError("Cannot draw a queue from an empty application universe")
    if size < 0:
        raise SimulationError(f"Queue size must be >= 0, got {size}")
    draws = np.random.default_rng(seed).integers(0, len(app_ids), size)
    return JobQueue(tuple(app_ids[i] for i in draws))


def generate_random_queues(
    app_ids: Sequence[str], count: int, size: int, seed: int
) -> List[JobQueue]:
    """`count` random queues; queue k is drawn with the seed sequence (seed, k)."""

    return [
        generate_random_queue(app_ids, size, _child_seed(seed, index)) for index in range(count)
    ]


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


class Level(Enum):
    """Bands of pair runtime relative to running the pair one after the other."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    def contains(self, ratio: float) -> bool:
        if self == Level.LOW:
            return ratio < 0.75
        if self == Level.MEDIUM:
            return 0.75 <= ratio < 1.0
        return ratio >= 1.0


def pair_ratio(oracle: DegradationOracle, a: str, b: str) -> float:
    return oracle.pair_runtime(a, b) / (oracle.runtime(a) + oracle.runtime(b))


def qualifying_pairs(oracle: DegradationOracle, level: Level) -> List[Tuple[str, str]]:
    app_ids = oracle.app_ids
    return [
        (a, b)
        for k, a in enumerate(app_ids)
        for b in app_ids[k + 1 :]
        if level.contains(pair_ratio(oracle, a, b))
    ]


def generate_stratified_queues(
    oracle: DegradationOracle, level: Level, count: int, size: int, seed: int
) -> List[JobQueue]:
    """Queues whose consecutive arrivals (2k, 2k+1) form a pair from the level's band."""

    if size % 2:
        raise SimulationError(f"Stratified queues need an even size, got {size}")
    candidates = qualifying_pairs(oracle, level)
    if len(candidates) < size // 2:
        raise SimulationError(
            f"Only {len(candidates)} {level.value}-degradation pairs, {size // 2} needed"
        )

    rng = np.random.default_rng(seed)
    queues = []
    for _ in range(count):
        jobs: List[str] = []
        for index in rng.choice(len(candidates), size // 2, replace=False):
            a, b = candidates[int(index)]
            jobs.extend((a, b) if rng.integers(2) else (b, a))
        queues.append(JobQueue(tuple(jobs)))
    return queues
