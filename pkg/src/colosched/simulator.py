from __future__ import annotations

import heapq
import json
import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from .errors import SimulationError
from .evaluation import holdout_split, r2_score
from .forest import ForestHyperparams
from .model import train_forest
from .profiles import ApplicationProfile, ColocationSample, FeatureSet
from .scheduler import (
    DegradationGraph,
    JobQueue,
    PlanTiming,
    Predictor,
    Schedule,
    Strategy,
    build_degradation_graph,
    plan_schedule,
    solve_blossom,
    solve_greedy,
)
from .workload import DegradationOracle, generate_random_queue

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "queue_id",
    "policy",
    "servers",
    "makespan_s",
    "normalized",
    "predict_time_s",
    "solve_time_s",
]

SLOTS_PER_SERVER = 2
# Relative slack below which a job's remaining work counts as done.
FINISH_TOLERANCE = 1e-9


class Policy(Enum):
    FIFO = "fifo"
    FIFO_SHARED = "fifo-shared"
    DI = "di"
    BLOSSOM = "blossom"
    GREEDY = "greedy"

    @property
    def strategy(self) -> Optional[Strategy]:
        return {
            Policy.DI: Strategy.DI,
            Policy.BLOSSOM: Strategy.BLOSSOM,
            Policy.GREEDY: Strategy.GREEDY,
        }.get(self)


ALL_POLICIES = tuple(Policy)


def parse_policies(text: str) -> Tuple[Policy, ...]:
    """Parse a comma separated policy list such as 'fifo,blossom'."""

    policies = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        try:
            policy = Policy(token)
        except ValueError:
            choices = ", ".join(p.value for p in Policy)
            raise SimulationError(f"Unknown policy {token!r}, expected one of {choices}") from None
        if policy not in policies:
            policies.append(policy)
    if not policies:
        raise SimulationError("No policy selected")
    return tuple(policies)


@dataclass(frozen=True)
class ClusterConfig:

    n_servers: int = 1
    jobs_per_server_scale: int = 1

    def __post_init__(self) -> None:
        if self.n_servers < 1:
            raise SimulationError(f"n_servers must be >= 1, got {self.n_servers}")
        if self.jobs_per_server_scale < 1:
            raise SimulationError(
                f"jobs_per_server_scale must be >= 1, got {self.jobs_per_server_scale}"
            )

    def queue_length(self, size: int) -> int:
        """Queue length for `size` jobs per server, scaled with the cluster."""

        return size * self.n_servers * self.jobs_per_server_scale


@dataclass(frozen=True)
class TimelineEntry:
    """A job's stay on a server."""

    job: int
    app_id: str
    server: int
    start: float
    end: float


@dataclass(frozen=True)
class ProgressSegment:
    """Interval during which a job progressed at a constant rate (solo-seconds per second)."""

    job: int
    server: int
    start: float
    end: float
    rate: float

    @property
    def work(self) -> float:
        return self.rate * (self.end - self.start)


@dataclass(frozen=True)
class SimulationResult:
    """Outcome of simulating one queue under one policy."""

    makespan: float
    timeline: Tuple[TimelineEntry, ...]
    segments: Tuple[ProgressSegment, ...] = field(repr=False)

    def work_done(self, job: int) -> float:
        return sum(segment.work for segment in self.segments if segment.job == job)

    def max_concurrency(self, server: int) -> int:
        """Largest number of jobs present on `server` at the same instant."""

        events = []
        for entry in self.timeline:
            if entry.server == server and entry.end > entry.start:
                events.append((entry.start, 1))
                events.append((entry.end, -1))
        # Departures sort before arrivals at equal times.
        events.sort(key=lambda event: (event[0], event[1]))
        running = peak = 0
        for _, delta in events:
            running += delta
            peak = max(peak, running)
        return peak


def _result(
    timeline: List[TimelineEntry], segments: List[ProgressSegment]
) -> SimulationResult:
    makespan = max((entry.end for entry in timeline), default=0.0)
    ordered = sorted(timeline, key=lambda entry: (entry.server, entry.start, entry.job))
    return SimulationResult(makespan, tuple(ordered), tuple(segments))


def simulate_fifo(
    queue: JobQueue, oracle: DegradationOracle, cluster: ClusterConfig = ClusterConfig()
) -> SimulationResult:
    """Run jobs one at a time per server in arrival order, each on the earliest free server."""

    oracle.check_covers(queue.jobs)
    free = [(0.0, server) for server in range(cluster.n_servers)]
    timeline: List[TimelineEntry] = []
    segments: List[ProgressSegment] = []
    for job, app_id in enumerate(queue.jobs):
        start, server = heapq.heappop(free)
        end = start + oracle.runtime(app_id)
        timeline.append(TimelineEntry(job, app_id, server, start, end))
        segments.append(ProgressSegment(job, server, start, end, 1.0))
        heapq.heappush(free, (end, server))
    return _result(timeline, segments)


def simulate_fifo_shared(
    queue: JobQueue, oracle: DegradationOracle, cluster: ClusterConfig = ClusterConfig()
) -> SimulationResult:
    """Uncontrolled node sharing in arrival order.

    Each server hosts up to two jobs. A job colocated with partner p progresses at
    1 / (1 + deg(job, p) / 100) solo-seconds per second, alone at 1. Whenever a slot
    frees, waiting jobs are packed in queue order: the head takes the lowest-index server
    with a free slot, and that server is filled to both slots before the next server
    receives a job. At time 0 jobs 0 and 1 share server 0, jobs 2 and 3 share server 1,
    and so on."""

    oracle.check_covers(queue.jobs)
    jobs = queue.jobs
    remaining = [oracle.runtime(app_id) for app_id in jobs]
    started: Dict[int, float] = {}
    placed: Dict[int, int] = {}
    servers: List[List[int]] = [[] for _ in range(cluster.n_servers)]
    timeline: List[TimelineEntry] = []
    segments: List[ProgressSegment] = []
    head = 0
    now = 0.0

    def fill() -> None:
        nonlocal head
        for server, running in enumerate(servers):
            while head < len(jobs) and len(running) < SLOTS_PER_SERVER:
                running.append(head)
                started[head], placed[head] = now, server
                head += 1

    def rates() -> Dict[int, float]:
        result = {}
        for running in servers:
            if len(running) == 2:
                a, b = running
                result[a] = 1.0 / (1.0 + oracle.degradation(jobs[a], jobs[b]) / 100.0)
                result[b] = 1.0 / (1.0 + oracle.degradation(jobs[b], jobs[a]) / 100.0)
            elif running:
                result[running[0]] = 1.0
        return result

    fill()
    while any(servers):
        rate = rates()
        # Earliest completion; ties resolve to the lowest job index.
        step, first = min((remaining[job] / r, job) for job, r in rate.items())
        end = now + step
        for job, r in rate.items():
            segments.append(ProgressSegment(job, placed[job], now, end, r))
            remaining[job] -= r * step
        remaining[first] = 0.0
        now = end

        for running in servers:
            for job in list(running):
                if remaining[job] <= FINISH_TOLERANCE * oracle.runtime(jobs[job]):
                    remaining[job] = 0.0
                    running.remove(job)
                    timeline.append(
                        TimelineEntry(job, jobs[job], placed[job], started[job], now)
                    )
        fill()
    return _result(timeline, segments)


def simulate_schedule(
    schedule: Schedule, oracle: DegradationOracle, cluster: ClusterConfig = ClusterConfig()
) -> SimulationResult:
    """Dispatch schedule entries in order to the earliest available server.

    A pair holds its server until both members finish their true degraded runtimes;
    the predictions the schedule was built from play no part here."""

    app_ids = schedule.app_ids
    if schedule.jobs != list(range(len(app_ids))):
        raise SimulationError(
            f"Schedule does not cover its {len(app_ids)} jobs exactly once: {schedule.jobs}"
        )
    oracle.check_covers(app_ids)

    free = [(0.0, server) for server in range(cluster.n_servers)]
    timeline: List[TimelineEntry] = []
    segments: List[ProgressSegment] = []
    for entry in schedule.entries:
        start, server = heapq.heappop(free)
        if entry.is_pair:
            i, j = entry.jobs
            members = [(i, oracle.degradation(app_ids[i], app_ids[j]))]
            members.append((j, oracle.degradation(app_ids[j], app_ids[i])))
        else:
            members = [(entry.jobs[0], 0.0)]
        busy_until = start
        for job, degradation in members:
            slowdown = 1.0 + degradation / 100.0
            end = start + oracle.runtime(app_ids[job]) * slowdown
            timeline.append(TimelineEntry(job, app_ids[job], server, start, end))
            segments.append(ProgressSegment(job, server, start, end, 1.0 / slowdown))
            busy_until = max(busy_until, end)
        heapq.heappush(free, (busy_until, server))
    return _result(timeline, segments)


@dataclass(frozen=True)
class ExperimentRow:

    queue_id: int
    policy: Policy
    servers: int
    makespan: float
    normalized: float
    predict_time: float = 0.0
    solve_time: float = 0.0


@dataclass(frozen=True)
class SimulationReport:
    """Makespans of every (queue, policy) run, normalized to FIFO on the same queue."""

    rows: Tuple[ExperimentRow, ...]
    results: Mapping[Tuple[int, Policy], SimulationResult] = field(repr=False)

    def makespans(self, policy: Policy) -> List[float]:
        return [row.makespan for row in self.rows if row.policy == policy]

    def normalized(self, policy: Policy) -> List[float]:
        return [row.normalized for row in self.rows if row.policy == policy]

    def mean_normalized(self, policy: Policy) -> float:
        values = self.normalized(policy)
        if not values:
            raise SimulationError(f"Policy {policy.value} was not simulated")
        return sum(values) / len(values)

    def to_frame(self, timings: bool = True) -> pd.DataFrame:
        records = [
            (
                row.queue_id,
                row.policy.value,
                row.servers,
                row.makespan,
                row.normalized,
                row.predict_time if timings else 0.0,
                row.solve_time if timings else 0.0,
            )
            for row in self.rows
        ]
        return pd.DataFrame(records, columns=REPORT_COLUMNS)

    def write_csv(
        self, path: Union[str, Path], header: Sequence[str] = (), timings: bool = True
    ) -> None:
        """Write report.csv; `header` lines are emitted as leading '#' comments."""

        with open(path, "w", encoding="utf-8", newline="") as stream:
            for line in header:
                stream.write(f"# {line}\n")
            self.to_frame(timings).to_csv(stream, index=False, lineterminator="\n")

    def timeline_document(self) -> Dict[str, object]:
        runs = []
        for (queue_id, policy), result in sorted(
            self.results.items(), key=lambda item: (item[0][0], item[0][1].value)
        ):
            runs.append(
                {
                    "queue_id": queue_id,
                    "policy": policy.value,
                    "makespan_s": result.makespan,
                    "timeline": [
                        {
                            "app_id": entry.app_id,
                            "job": entry.job,
                            "server": entry.server,
                            "start_s": entry.start,
                            "end_s": entry.end,
                        }
                        for entry in result.timeline
                    ],
                }
            )
        return {"runs": runs}

    def write_timelines(self, path: Union[str, Path]) -> None:
        text = json.dumps(self.timeline_document(), indent=2)
        Path(path).write_text(text + "\n", encoding="utf-8")


def run_experiment(
    policies: Sequence[Policy],
    queues: Sequence[JobQueue],
    profiles: Mapping[str, ApplicationProfile],
    oracle: DegradationOracle,
    predictor: Optional[Predictor] = None,
    cluster: ClusterConfig = ClusterConfig(),
    charge_overhead: bool = False,
) -> SimulationReport:
    """Plan and simulate every queue under every policy.

    Blossom and greedy plan from `predictor` on a degradation graph built once per queue;
    all policies are simulated against the oracle. With `charge_overhead` the measured
    prediction and solving time is added to the makespan of model-driven policies."""

    needs_model = any(policy in (Policy.BLOSSOM, Policy.GREEDY) for policy in policies)
    if needs_model and predictor is None:
        raise SimulationError("Blossom and greedy policies need a degradation predictor")

    rows: List[ExperimentRow] = []
    results: Dict[Tuple[int, Policy], SimulationResult] = {}
    for queue_id, queue in enumerate(queues):
        fifo = simulate_fifo(queue, oracle, cluster)
        graph: Optional[DegradationGraph] = None
        predict_time = 0.0
        if needs_model and predictor is not None:
            started = time.perf_counter()
            graph = build_degradation_graph(queue, profiles, predictor)
            predict_time = time.perf_counter() - started

        for policy in policies:
            timing = PlanTiming()
            if policy == Policy.FIFO:
                result = fifo
            elif policy == Policy.FIFO_SHARED:
                result = simulate_fifo_shared(queue, oracle, cluster)
            else:
                strategy = policy.strategy
                assert strategy is not None
                schedule, timing = plan_schedule(queue, profiles, strategy, graph=graph)
                if strategy != Strategy.DI:
                    timing = PlanTiming(predict_time, timing.solve_time)
                result = simulate_schedule(schedule, oracle, cluster)

            makespan = result.makespan
            if charge_overhead and policy in (Policy.BLOSSOM, Policy.GREEDY):
                makespan += timing.predict_time + timing.solve_time
            normalized = makespan / fifo.makespan if fifo.makespan > 0 else 1.0
            if policy == Policy.FIFO:
                normalized = 1.0
            rows.append(
                ExperimentRow(
                    queue_id,
                    policy,
                    cluster.n_servers,
                    makespan,
                    normalized,
                    timing.predict_time,
                    timing.solve_time,
                )
            )
            results[(queue_id, policy)] = result
        logger.info("Queue %d: %d jobs, %d policies", queue_id, len(queue), len(policies))
    return SimulationReport(tuple(rows), results)


def read_reports(paths: Iterable[Union[str, Path]]) -> pd.DataFrame:
    frames = []
    for path in paths:
        try:
            frame = pd.read_csv(path, comment="#")
        except FileNotFoundError:
            raise SimulationError(f"Report file not found: {path}") from None
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise SimulationError(f"{path}: malformed report: {e}") from None
        missing = [column for column in REPORT_COLUMNS if column not in frame.columns]
        if missing:
            raise SimulationError(f"{path}: missing columns {', '.join(missing)}")
        frames.append(frame[REPORT_COLUMNS])
    if not frames:
        raise SimulationError("No report to compare")
    return pd.concat(frames, ignore_index=True)


def summarize_reports(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean, min and max normalized makespan per (policy, servers)."""

    summary = (
        frame.groupby(["policy", "servers"], sort=True)["normalized"]
        .agg(["count", "mean", "min", "max"])
        .reset_index()
    )
    return summary


@dataclass(frozen=True)
class OverheadRow:

    n_jobs: int
    predict_time: float
    blossom_time: float
    greedy_time: float


def _best_of(repeats: int, action: Callable[[], object]) -> float:
    best = float("inf")
    for _ in range(max(1, repeats)):
        started = time.perf_counter()
        action()
        best = min(best, time.perf_counter() - started)
    return best


def measure_overhead(
    sizes: Sequence[int],
    profiles: Mapping[str, ApplicationProfile],
    predictor: Predictor,
    seed: int,
    repeats: int = 3,
) -> List[OverheadRow]:
    """Wall-clock time to predict every pair and to solve with blossom and greedy.

    Each figure is the fastest of `repeats` runs on one random queue per size."""

    app_ids = sorted(profiles)
    rows = []
    for size in sizes:
        queue = generate_random_queue(app_ids, size, seed)
        graphs: List[DegradationGraph] = []
        predict_time = _best_of(
            repeats, lambda: graphs.append(build_degradation_graph(queue, profiles, predictor))
        )
        capped = graphs[-1].capped()
        row = OverheadRow(
            size,
            predict_time,
            _best_of(repeats, lambda: solve_blossom(capped)),
            _best_of(repeats, lambda: solve_greedy(capped)),
        )
        logger.info("Overhead at %d jobs: %s", size, row)
        rows.append(row)
    return rows


@dataclass(frozen=True)
class SweepRow:

    n_estimators: int
    r2: float
    predict_time: float


def estimator_sweep(
    dataset: Sequence[ColocationSample],
    feature_set: FeatureSet,
    counts: Sequence[int],
    hp: ForestHyperparams,
    queue: JobQueue,
    profiles: Mapping[str, ApplicationProfile],
    test_fraction: float = 0.3,
    repeats: int = 3,
    jobs: int = 1,
) -> List[SweepRow]:
    """Holdout accuracy and all-pairs prediction time as the number of trees varies."""

    train, test = holdout_split(dataset, test_fraction, hp.seed)
    actual = [sample.degradation for sample in test]
    rows = []
    for count in counts:
        model = train_forest(train, replace(hp, n_estimators=count), feature_set, jobs)
        r2 = r2_score(actual, model.predict_many([sample.features for sample in test]))
        predict_time = _best_of(
            repeats, lambda: build_degradation_graph(queue, profiles, model)
        )
        rows.append(SweepRow(count, r2, predict_time))
    return rows
