from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Protocol,
    Sequence,
    Set,
    Tuple,
    Union,
    runtime_checkable,
)

import networkx as nx
import numpy as np

from .errors import ScheduleError
from .profiles import ApplicationProfile

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 12

Pair = Tuple[int, int]


class Strategy(Enum):
    BLOSSOM = "blossom"
    GREEDY = "greedy"
    DI = "di"


class Predictor(Protocol):
    """Anything that can estimate the degradation (%) a primary suffers from an interferer."""

    def predict(self, primary: ApplicationProfile, interfering: ApplicationProfile) -> float:
        ...


@runtime_checkable
class BatchPredictor(Protocol):
    """A predictor that can score every ordered pair of a queue in one call."""

    def predict_pairs(self, jobs: Sequence[ApplicationProfile]) -> np.ndarray[Any, Any]:
        ...


@dataclass(frozen=True)
class JobQueue:
    """Application ids in arrival order; the same application may be queued twice."""

    jobs: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.jobs)

    def resolve(self, profiles: Mapping[str, ApplicationProfile]) -> List[ApplicationProfile]:
        try:
            return [profiles[app_id] for app_id in self.jobs]
        except KeyError as e:
            raise ScheduleError(f"Unresolved job {e.args[0]}") from None

    @classmethod
    def load(cls, path: Union[str, Path]) -> JobQueue:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(tuple(str(app_id) for app_id in document["jobs"]))
        except FileNotFoundError:
            raise ScheduleError(f"Queue file not found: {path}") from None
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ScheduleError(f"{path}: malformed queue file: {e}") from None

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps({"jobs": list(self.jobs)}) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Edge:

    deg_ij: float
    deg_ji: float
    weight: float


def pair_runtime(t_i: float, t_j: float, deg_ij: float, deg_ji: float) -> float:
    """Runtime of a colocated pair: the slower of the two degraded runtimes."""

    return max(t_i * (1 + deg_ij / 100.0), t_j * (1 + deg_ji / 100.0))


@dataclass(frozen=True)
class DegradationGraph:
    """Complete graph over queued jobs; edge (i, j), i < j, weighs the pair's runtime."""

    runtimes: Tuple[float, ...]
    edges: Mapping[Pair, Edge]
    app_ids: Tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.runtimes)

    @property
    def m(self) -> int:
        return len(self.edges)

    def weight(self, i: int, j: int) -> float:
        return self.edges[(i, j) if i < j else (j, i)].weight

    def serial_time(self, i: int, j: int) -> float:
        return self.runtimes[i] + self.runtimes[j]

    def capped(self) -> DegradationGraph:
        """Copy whose weights never exceed the pair's serial time."""

        edges = {
            pair: Edge(edge.deg_ij, edge.deg_ji, min(edge.weight, self.serial_time(*pair)))
            for pair, edge in self.edges.items()
        }
        return DegradationGraph(self.runtimes, edges, self.app_ids)

    @classmethod
    def from_weights(
        cls, runtimes: Sequence[float], weights: Mapping[Pair, float]
    ) -> DegradationGraph:
        edges: Dict[Pair, Edge] = {}
        for (i, j), weight in weights.items():
            edges[(min(i, j), max(i, j))] = Edge(0.0, 0.0, float(weight))
        graph = cls(tuple(float(t) for t in runtimes), edges)
        if graph.m != graph.n * (graph.n - 1) // 2:
            raise ScheduleError(f"Graph on {graph.n} nodes is not complete ({graph.m} edges)")
        return graph


def build_degradation_graph(
    queue: JobQueue, profiles: Mapping[str, ApplicationProfile], predictor: Predictor
) -> DegradationGraph:
    """Predict both directions of every job pair and weigh each edge by the pair runtime."""

    if not len(queue):
        raise ScheduleError("Empty queue")
    jobs = queue.resolve(profiles)
    n = len(jobs)
    if isinstance(predictor, BatchPredictor):
        degradation = np.asarray(predictor.predict_pairs(jobs), dtype=np.float64)
    else:
        degradation = np.zeros((n, n), dtype=np.float64)
        for i, primary in enumerate(jobs):
            for j in range(i + 1, n):
                degradation[i, j] = predictor.predict(primary, jobs[j])
                degradation[j, i] = predictor.predict(jobs[j], primary)

    runtimes = np.array([job.t_alone for job in jobs], dtype=np.float64)
    degraded = runtimes[:, None] * (1 + degradation / 100.0)
    weights = np.maximum(degraded, degraded.T)
    upper_i, upper_j = np.triu_indices(n, k=1)
    edges = {
        (i, j): Edge(d_ij, d_ji, w)
        for i, j, d_ij, d_ji, w in zip(
            upper_i.tolist(),
            upper_j.tolist(),
            degradation[upper_i, upper_j].tolist(),
            degradation[upper_j, upper_i].tolist(),
            weights[upper_i, upper_j].tolist(),
        )
    }
    return DegradationGraph(tuple(runtimes.tolist()), edges, queue.jobs)


@dataclass(frozen=True)
class Pairing:

    pairs: Tuple[Pair, ...]
    solos: Tuple[int, ...]
    total_weight: float


def make_pairing(
    graph: DegradationGraph, pairs: Sequence[Pair], solos: Sequence[int]
) -> Pairing:
    ordered = tuple(sorted((min(i, j), max(i, j)) for i, j in pairs))
    total = sum(graph.weight(i, j) for i, j in ordered) + sum(graph.runtimes[i] for i in solos)
    return Pairing(ordered, tuple(sorted(solos)), total)


def _split_dummy(pairs: Sequence[Pair], dummy: int) -> Tuple[List[Pair], List[int]]:
    kept: List[Pair] = []
    solos: List[int] = []
    for i, j in pairs:
        if dummy in (i, j):
            solos.append(i if j == dummy else j)
        else:
            kept.append((i, j))
    return kept, solos


def _augmented_weight(graph: DegradationGraph, i: int, j: int) -> float:
    # The extra node of an odd-sized graph stands for running alone.
    if j == graph.n:
        return graph.runtimes[i]
    return graph.weight(i, j)


def solve_blossom(graph: DegradationGraph) -> Pairing:
    """Minimum-weight perfect matching; an odd graph gains one node meaning "run alone"."""

    n = graph.n
    if n < 2:
        return make_pairing(graph, [], list(range(n)))

    nodes = n + n % 2
    weights = {
        (i, j): _augmented_weight(graph, i, j) for i in range(nodes) for j in range(i + 1, nodes)
    }
    # Maximum-cardinality matching on inverted weights is a minimum-weight perfect matching.
    ceiling = max(weights.values()) + 1.0
    matcher = nx.Graph()
    matcher.add_nodes_from(range(nodes))
    matcher.add_weighted_edges_from((i, j, ceiling - w) for (i, j), w in weights.items())
    matching = nx.max_weight_matching(matcher, maxcardinality=True)

    pairs, solos = _split_dummy([(min(i, j), max(i, j)) for i, j in matching], n)
    if 2 * len(pairs) + len(solos) != n:
        raise ScheduleError("Blossom matching is not perfect")
    return make_pairing(graph, pairs, solos)


def solve_greedy(graph: DegradationGraph) -> Pairing:
    """Repeatedly take the lightest edge whose two jobs are both still unmatched."""

    matched: Set[int] = set()
    pairs: List[Pair] = []
    for (i, j), _ in sorted(graph.edges.items(), key=lambda item: (item[1].weight, item[0])):
        if i not in matched and j not in matched:
            pairs.append((i, j))
            matched.update((i, j))
    solos = [i for i in range(graph.n) if i not in matched]
    return make_pairing(graph, pairs, solos)


def iter_perfect_matchings(nodes: Sequence[int]) -> Iterator[List[Pair]]:
    if not nodes:
        yield []
        return
    first, rest = nodes[0], list(nodes[1:])
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        for matching in iter_perfect_matchings(remaining):
            yield [(first, partner)] + matching


def brute_force_matching(graph: DegradationGraph) -> Pairing:
    """Exhaustive minimum over all perfect matchings; for checking the real solvers."""

    n = graph.n
    if n > BRUTE_FORCE_LIMIT:
        raise ScheduleError(f"Brute force is limited to {BRUTE_FORCE_LIMIT} jobs, got {n}")
    nodes = list(range(n + n % 2))

    best: Optional[List[Pair]] = None
    best_total = 0.0
    for matching in iter_perfect_matchings(nodes):
        total = sum(_augmented_weight(graph, i, j) for i, j in matching)
        if best is None or total < best_total:
            best, best_total = matching, total

    pairs, solos = _split_dummy(best or [], n)
    return make_pairing(graph, pairs, solos)


@dataclass(frozen=True)
class ScheduleEntry:
    """One dispatch unit: a colocated pair or a job running alone."""

    jobs: Tuple[int, ...]
    runtime: float

    @property
    def is_pair(self) -> bool:
        return len(self.jobs) == 2


@dataclass(frozen=True)
class Schedule:

    entries: Tuple[ScheduleEntry, ...]
    predicted_makespan: float
    strategy: Strategy
    app_ids: Tuple[str, ...] = ()

    @property
    def jobs(self) -> List[int]:
        return sorted(job for entry in self.entries for job in entry.jobs)

    def to_document(self) -> Dict[str, Any]:
        entries: List[Dict[str, Any]] = []
        for entry in self.entries:
            if entry.is_pair:
                entries.append({"pair": list(entry.jobs), "weight_s": entry.runtime})
            else:
                entries.append({"solo": entry.jobs[0], "runtime_s": entry.runtime})
        return {
            "strategy": self.strategy.value,
            "jobs": list(self.app_ids),
            "entries": entries,
            "predicted_makespan_s": self.predicted_makespan,
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_document(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> Schedule:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
            entries = []
            for item in document["entries"]:
                if "pair" in item:
                    i, j = item["pair"]
                    entries.append(ScheduleEntry((int(i), int(j)), float(item["weight_s"])))
                else:
                    entries.append(ScheduleEntry((int(item["solo"]),), float(item["runtime_s"])))
            return cls(
                tuple(entries),
                float(document["predicted_makespan_s"]),
                Strategy(document["strategy"]),
                tuple(document.get("jobs", ())),
            )
        except FileNotFoundError:
            raise ScheduleError(f"Schedule file not found: {path}") from None
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ScheduleError(f"{path}: malformed schedule file: {e}") from None


def _ordered_schedule(
    entries: Sequence[ScheduleEntry], strategy: Strategy, app_ids: Tuple[str, ...]
) -> Schedule:
    ordered = tuple(sorted(entries, key=lambda entry: (entry.runtime, entry.jobs)))
    return Schedule(ordered, sum(entry.runtime for entry in ordered), strategy, app_ids)


def apply_threshold(
    pairing: Pairing, graph: DegradationGraph, strategy: Strategy = Strategy.BLOSSOM
) -> Schedule:
    """Serialize every pair predicted to run longer together than one after the other.

    Entries are ordered by their runtime contribution (pairs by weight, solos by t_alone)."""

    entries = [ScheduleEntry((i,), graph.runtimes[i]) for i in pairing.solos]
    serialized = 0
    for i, j in pairing.pairs:
        weight = graph.weight(i, j)
        if weight > graph.serial_time(i, j):
            serialized += 1
            entries.append(ScheduleEntry((i,), graph.runtimes[i]))
            entries.append(ScheduleEntry((j,), graph.runtimes[j]))
        else:
            entries.append(ScheduleEntry((i, j), weight))
    if serialized:
        logger.info("Serialized %d pair(s) above the serial-time threshold", serialized)
    return _ordered_schedule(entries, strategy, graph.app_ids)


def miss_rate(profile: ApplicationProfile) -> float:
    """Last-level cache misses per second of solo runtime."""

    return profile.counter_mean("cache_misses") / profile.t_alone


def di_pairing(queue: JobQueue, profiles: Mapping[str, ApplicationProfile]) -> Pairing:
    """Distributed Intensity: pair the lowest miss rate with the highest, and so on inwards.

    DI predicts no interference, so each pair is weighed by its longer solo runtime."""

    jobs = queue.resolve(profiles)
    rates = [miss_rate(job) for job in jobs]
    order = sorted(range(len(jobs)), key=lambda i: (rates[i], jobs[i].app_id, i))
    pairs = [(order[k], order[-1 - k]) for k in range(len(order) // 2)]
    solos = [order[len(order) // 2]] if len(order) % 2 else []

    runtimes = [job.t_alone for job in jobs]
    ordered = tuple(sorted((min(i, j), max(i, j)) for i, j in pairs))
    total = sum(max(runtimes[i], runtimes[j]) for i, j in ordered)
    return Pairing(ordered, tuple(solos), total + sum(runtimes[i] for i in solos))


def di_schedule(queue: JobQueue, profiles: Mapping[str, ApplicationProfile]) -> Schedule:
    pairing = di_pairing(queue, profiles)
    runtimes = [profile.t_alone for profile in queue.resolve(profiles)]
    entries = [ScheduleEntry((i,), runtimes[i]) for i in pairing.solos]
    entries += [ScheduleEntry((i, j), max(runtimes[i], runtimes[j])) for i, j in pairing.pairs]
    return _ordered_schedule(entries, Strategy.DI, queue.jobs)


@dataclass(frozen=True)
class PlanTiming:
    """Wall-clock seconds spent predicting degradations and computing pairs."""

    predict_time: float = 0.0
    solve_time: float = 0.0


SOLVERS = {Strategy.BLOSSOM: solve_blossom, Strategy.GREEDY: solve_greedy}


def plan_schedule(
    queue: JobQueue,
    profiles: Mapping[str, ApplicationProfile],
    strategy: Strategy,
    predictor: Optional[Predictor] = None,
    graph: Optional[DegradationGraph] = None,
) -> Tuple[Schedule, PlanTiming]:
    """Build the schedule for one queue with the given strategy.

    Model-driven strategies match on serial-capped weights so the chosen pairs are the
    best ones once the threshold has been applied. A prebuilt `graph` skips prediction."""

    if strategy == Strategy.DI:
        started = time.perf_counter()
        schedule = di_schedule(queue, profiles)
        return schedule, PlanTiming(solve_time=time.perf_counter() - started)

    predict_time = 0.0
    if graph is None:
        if predictor is None:
            raise ScheduleError(f"Strategy {strategy.value} needs a degradation predictor")
        started = time.perf_counter()
        graph = build_degradation_graph(queue, profiles, predictor)
        predict_time = time.perf_counter() - started

    started = time.perf_counter()
    pairing = SOLVERS[strategy](graph.capped())
    schedule = apply_threshold(pairing, graph, strategy)
    solve_time = time.perf_counter() - started
    logger.debug(
        "%s: %d jobs, predicted makespan %.3f s",
        strategy.value,
        graph.n,
        schedule.predicted_makespan,
    )
    return schedule, PlanTiming(predict_time, solve_time)
