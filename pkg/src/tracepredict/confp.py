"""Race and deadlock prediction over conflict-preserving reorderings.

A set of events ``X`` is *feasible* when it is closed under thread
predecessors and reads-from sources, and every acquire in ``X`` except the
last one (in trace order) on its lock has its release in ``X`` too.  The trace
order projection of a feasible set is a conflict-preserving reordering, so a
group of events is simultaneously enabled in such a reordering iff the least
feasible set containing all their thread predecessors avoids them.
"""

from __future__ import annotations

from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product

import networkx as nx

from .trace import (
    ACQUIRE,
    READ,
    Execution,
    Label,
    SubsequenceMask,
    TraceError,
    check_well_formed,
    conflicting,
)


def feasible_closure(
    execution: Execution, seeds: Iterable[int], forbidden: Iterable[int] = ()
) -> SubsequenceMask | None:
    """Least feasible superset of ``seeds``; ``None`` if it must contain a forbidden event."""
    forbidden = frozenset(forbidden)
    labels = execution.labels
    closed: set[int] = set()
    latest_acquire: dict[str, int] = {}
    work = list(seeds)
    while work:
        e = work.pop()
        if e in closed:
            continue
        if e in forbidden:
            return None
        execution._check_index(e)
        closed.add(e)
        p = execution.thread_predecessor(e)
        if p is not None:
            work.append(p)
        lab = labels[e - 1]
        if lab.op == READ:
            src = execution.rf[e]
            if src is not None:
                work.append(src)
        elif lab.op == ACQUIRE:
            # only the latest acquire of a lock may stay open
            prev = latest_acquire.get(lab.operand)
            if prev is None or prev < e:
                latest_acquire[lab.operand] = e
                earlier = prev
            else:
                earlier = e
            if earlier is not None:
                rel = execution.release_of.get(earlier)
                if rel is None:
                    return None
                work.append(rel)
    return SubsequenceMask(len(execution), frozenset(closed))


@dataclass(frozen=True)
class RaceReport:
    first: int
    second: int
    labels: tuple[Label, Label]
    witness: SubsequenceMask

    def to_dict(self) -> dict:
        return {
            "events": [self.first, self.second],
            "labels": [str(lab) for lab in self.labels],
            "witness": self.witness.indices(),
        }


@dataclass(frozen=True)
class RaceResult:
    races: tuple[RaceReport, ...]

    @property
    def count(self) -> int:
        """Distinct second events with at least one racing predecessor."""
        return len({r.second for r in self.races})


@dataclass(frozen=True)
class DeadlockPattern:
    acquires: tuple[int, ...]
    locks: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.acquires) != len(self.locks) or len(self.acquires) < 2:
            raise ValueError("a deadlock pattern needs at least two acquires, one lock each")


@dataclass(frozen=True)
class DeadlockReport:
    pattern: DeadlockPattern
    labels: tuple[Label, ...]
    witness: SubsequenceMask

    def to_dict(self) -> dict:
        return {
            "events": list(self.pattern.acquires),
            "locks": list(self.pattern.locks),
            "labels": [str(lab) for lab in self.labels],
            "witness": self.witness.indices(),
        }


@dataclass(frozen=True)
class DeadlockResult:
    deadlocks: tuple[DeadlockReport, ...]

    @property
    def count(self) -> int:
        """Distinct label tuples among the confirmed patterns."""
        return len({r.labels for r in self.deadlocks})


def _require_well_formed(execution: Execution) -> None:
    v = check_well_formed(execution)
    if v is not None:
        raise TraceError(f"execution is not well-formed at event {v.index}: {v.reason}")


def _predecessor_seeds(execution: Execution, events: Iterable[int]) -> set[int]:
    seeds: set[int] = set()
    for e in events:
        seeds.update(execution.thread_predecessors(e))
    return seeds


def confp_race_pair(execution: Execution, i: int, j: int) -> RaceReport | None:
    """Whether conflicting events ``i`` and ``j`` of different threads can both be enabled."""
    a, b = execution.label(i), execution.label(j)
    if a.thread == b.thread:
        raise ValueError(f"events {i} and {j} belong to the same thread")
    if not conflicting(a, b):
        raise ValueError(f"events {i} and {j} do not conflict")
    first, second = min(i, j), max(i, j)
    mask = feasible_closure(execution, _predecessor_seeds(execution, (i, j)), (i, j))
    if mask is None:
        return None
    return RaceReport(first, second, (execution.label(first), execution.label(second)), mask)


def _race_candidates(execution: Execution, e2: int) -> list[int]:
    """Conflicting earlier events of other threads, latest per (thread, op) first."""
    lab = execution.labels[e2 - 1]
    cands = [
        e1
        for e1 in range(e2 - 1, 0, -1)
        if execution.labels[e1 - 1].thread != lab.thread
        and conflicting(execution.labels[e1 - 1], lab)
    ]
    heads: dict[tuple[str, str], int] = {}
    for e1 in cands:
        heads.setdefault((execution.labels[e1 - 1].thread, execution.labels[e1 - 1].op), e1)
    first = sorted(heads.values(), reverse=True)
    return first + [e1 for e1 in cands if e1 not in set(first)]


def _races_for(args: tuple[Execution, tuple[int, ...], bool]) -> list[RaceReport]:
    execution, seconds, all_pairs = args
    out: list[RaceReport] = []
    for e2 in seconds:
        for e1 in _race_candidates(execution, e2):
            report = confp_race_pair(execution, e1, e2)
            if report is not None:
                out.append(report)
                if not all_pairs:
                    break
    return out


def confp_races(execution: Execution, *, all_pairs: bool = False, workers: int = 1) -> RaceResult:
    """Predictable races, sorted by (second, first).

    By default one race is reported per second event, which is all the count
    needs; ``all_pairs`` checks every candidate pair.
    """
    _require_well_formed(execution)
    seconds = tuple(i for i, lab in enumerate(execution.labels, 1) if lab.is_access)
    if workers <= 1 or len(seconds) < 2:
        reports = _races_for((execution, seconds, all_pairs))
    else:
        chunks = [seconds[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_races_for, [(execution, c, all_pairs) for c in chunks])
            reports = [r for part in parts for r in part]
    reports.sort(key=lambda r: (r.second, r.first))
    return RaceResult(tuple(reports))


def lock_graph(execution: Execution) -> nx.DiGraph:
    """Edge ``l -> m`` labelled with the acquires of ``m`` made while holding ``l``."""
    g = nx.DiGraph()
    g.add_nodes_from(execution.locks)
    for i, lab in enumerate(execution.labels, 1):
        if lab.op != ACQUIRE:
            continue
        for held in execution.held[i]:
            if g.has_edge(held, lab.operand):
                g[held][lab.operand]["events"].append(i)
            else:
                g.add_edge(held, lab.operand, events=[i])
    return g


def _canonical(events: tuple[int, ...], locks: tuple[str, ...]) -> tuple[tuple[int, ...], tuple[str, ...]]:
    k = events.index(min(events))
    return events[k:] + events[:k], locks[k:] + locks[:k]


def _patterns_for_cycle(execution: Execution, g: nx.DiGraph, cycle: list[str]):
    k = len(cycle)
    # edge i runs from cycle[i-1] (held) to cycle[i] (acquired)
    choices = [g[cycle[i - 1]][cycle[i]]["events"] for i in range(k)]
    for events in product(*choices):
        threads = {execution.thread_of[e] for e in events}
        if len(threads) != k:
            continue
        held = [execution.held[e] for e in events]
        if any(held[x] & held[y] for x in range(k) for y in range(x + 1, k)):
            continue
        yield _canonical(tuple(events), tuple(cycle))


def _confirm(args: tuple[Execution, list[tuple[tuple[int, ...], tuple[str, ...]]]]) -> list[DeadlockReport]:
    execution, patterns = args
    out = []
    for events, locks in patterns:
        mask = feasible_closure(execution, _predecessor_seeds(execution, events), events)
        if mask is not None:
            labels = tuple(execution.label(e) for e in events)
            out.append(DeadlockReport(DeadlockPattern(events, locks), labels, mask))
    return out


def confp_deadlocks(execution: Execution, max_k: int = 2, *, workers: int = 1) -> DeadlockResult:
    """Deadlock patterns of at most ``max_k`` threads that some reordering can reach."""
    if max_k < 2:
        raise ValueError("max_k must be at least 2")
    _require_well_formed(execution)
    g = lock_graph(execution)
    patterns = set()
    for cycle in nx.simple_cycles(g, length_bound=max_k):
        if len(cycle) >= 2:
            patterns.update(_patterns_for_cycle(execution, g, cycle))
    ordered = sorted(patterns)
    if workers <= 1 or len(ordered) < 2:
        reports = _confirm((execution, ordered))
    else:
        chunks = [ordered[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = [r for part in pool.map(_confirm, [(execution, c) for c in chunks]) for r in part]
    reports.sort(key=lambda r: r.pattern.acquires)
    return DeadlockResult(tuple(reports))
