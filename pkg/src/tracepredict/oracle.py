"""Brute-force closure sets for small inputs.

These are exponential reference computations used to certify the streaming
and enumeration algorithms elsewhere in the package.  Every function refuses
inputs longer than ``bound`` instead of truncating.

For a plain letter sequence the closures are returned as sets of letter
tuples.  For an :class:`~tracepredict.trace.Execution` they are returned as
sets of event-index tuples (1-based positions in the execution), so that
distinct events carrying the same label stay distinguishable.  Same-letter
events are always dependent, hence the two views are in bijection.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

from .alphabet import ConcurrentAlphabet, DualAlphabet, build_rwl_dual
from .trace import ACQUIRE, READ, RELEASE, WRITE, Execution, Label

DEFAULT_BOUND = 10

Reordering = tuple[int, ...]


class OracleBoundError(ValueError):
    """Input exceeds the configured size bound of an oracle."""


def _check_bound(n: int, bound: int) -> None:
    if n > bound:
        raise OracleBoundError(f"input has {n} events, oracle bound is {bound}")


def _letters(w: Execution | Sequence) -> tuple[list, bool]:
    if isinstance(w, Execution):
        return list(w.labels), True
    return list(w), False


def _matrix(letters: list, rel: Callable[[object, object], bool]) -> list[int]:
    """Bitmask per event (1-based) of the events related to it."""
    n = len(letters)
    rows = [0] * (n + 1)
    for i in range(1, n + 1):
        a = letters[i - 1]
        for j in range(1, n + 1):
            if rel(a, letters[j - 1]):
                rows[i] |= 1 << j
    return rows


def _saturate(
    n: int,
    dependent: list[int],
    drop_blockers: list[int] | None,
    last_only: bool = False,
) -> set[Reordering]:
    """Breadth-first fixpoint of swap steps and drop steps from ``1..n``.

    Adjacent events ``a b`` may be swapped when ``b`` is not in
    ``dependent[a]``.  The event at position ``k`` may be dropped when no
    later event of the sequence is in ``drop_blockers[event]`` (or, with
    ``last_only``, when it is the final event).
    """
    seed = tuple(range(1, n + 1))
    seen = {seed}
    frontier = [seed]
    while frontier:
        nxt = []
        for s in frontier:
            m = len(s)
            for k in range(m - 1):
                a, b = s[k], s[k + 1]
                if not dependent[a] >> b & 1:
                    t = s[:k] + (b, a) + s[k + 2 :]
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
            if drop_blockers is None:
                continue
            if last_only:
                if m:
                    t = s[:-1]
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
                continue
            suffix = 0
            for k in range(m - 1, -1, -1):
                e = s[k]
                if not drop_blockers[e] & suffix:
                    t = s[:k] + s[k + 1 :]
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
                suffix |= 1 << e
        frontier = nxt
    return seen


def _spell(letters: list, seqs: set[Reordering], as_events: bool) -> set:
    if as_events:
        return seqs
    return {tuple(letters[i - 1] for i in s) for s in seqs}


def maz_equiv_class(
    d: ConcurrentAlphabet, w: Execution | Sequence, *, bound: int = DEFAULT_BOUND
) -> set:
    """All strings reachable from ``w`` by swapping adjacent independent letters."""
    letters, as_events = _letters(w)
    _check_bound(len(letters), bound)
    dep = _matrix(letters, d.dependent)
    return _spell(letters, _saturate(len(letters), dep, None), as_events)


def ideal_closure(
    d: ConcurrentAlphabet, w: Execution | Sequence, *, bound: int = DEFAULT_BOUND
) -> set:
    """Swaps of independent neighbours interleaved with dropping the last letter."""
    letters, as_events = _letters(w)
    _check_bound(len(letters), bound)
    dep = _matrix(letters, d.dependent)
    return _spell(letters, _saturate(len(letters), dep, [0] * (len(letters) + 1), True), as_events)


def strong_closure(d: DualAlphabet, w: Execution | Sequence, *, bound: int = DEFAULT_BOUND) -> set:
    """Strong downward closure: swaps outside ``strong | weak``, and dropping
    any letter with no strongly dependent letter after it."""
    letters, as_events = _letters(w)
    _check_bound(len(letters), bound)
    dep = _matrix(letters, d.dependent)
    strong = _matrix(letters, d.strong)
    return _spell(letters, _saturate(len(letters), dep, strong), as_events)


def rf_closure(execution: Execution, *, bound: int = DEFAULT_BOUND) -> set[Reordering]:
    """Strong reads-from closure under the read/write/lock dual alphabet.

    An event may be dropped when no later event of the current sequence is a
    thread successor of it or reads from it in the original execution.  This
    subsumes the strong-dependence drop rule.
    """
    n = len(execution)
    _check_bound(n, bound)
    letters = list(execution.labels)
    dep = _matrix(letters, build_rwl_dual(execution).dependent)
    blockers = [0] * (n + 1)
    for i in range(1, n + 1):
        for j in execution.thread_events[execution.thread_of[i]]:
            if j > i:
                blockers[i] |= 1 << j
    for r, w in execution.rf.items():
        if w is not None:
            blockers[w] |= 1 << r
    return _saturate(n, dep, blockers)


def _reorderings(
    execution: Execution, *, sync_preserving: bool, conflict_preserving: bool
) -> set[Reordering]:
    """Depth-first enumeration of correct reorderings (prefix-closed, so every
    node of the search tree is itself a result)."""
    labels = execution.labels
    threads = execution.thread_events
    results: set[Reordering] = set()
    seq: list[int] = []
    cursor = [0] * len(threads)
    owner: dict[str, str] = {}
    last_write: dict[str, int] = {}
    max_acquire: dict[str, int] = {}
    max_read: dict[str, int] = {}

    def visit() -> None:
        results.add(tuple(seq))
        for t, evs in enumerate(threads):
            if cursor[t] == len(evs):
                continue
            e = evs[cursor[t]]
            lab: Label = labels[e - 1]
            x = lab.operand
            undo: list[tuple[dict, str, object]] = []
            if lab.op == ACQUIRE:
                if x in owner:
                    continue
                if (sync_preserving or conflict_preserving) and max_acquire.get(x, 0) > e:
                    continue
                undo.append((owner, x, owner.get(x)))
                owner[x] = lab.thread
                undo.append((max_acquire, x, max_acquire.get(x)))
                max_acquire[x] = max(e, max_acquire.get(x, 0))
            elif lab.op == RELEASE:
                if owner.get(x) != lab.thread:
                    continue
                undo.append((owner, x, owner[x]))
                del owner[x]
            elif lab.op == READ:
                if last_write.get(x) != execution.rf[e]:
                    continue
                if conflict_preserving and last_write.get(x, 0) > e:
                    continue
                undo.append((max_read, x, max_read.get(x)))
                max_read[x] = max(e, max_read.get(x, 0))
            else:
                if conflict_preserving and max(last_write.get(x, 0), max_read.get(x, 0)) > e:
                    continue
                undo.append((last_write, x, last_write.get(x)))
                last_write[x] = e
            seq.append(e)
            cursor[t] += 1
            visit()
            cursor[t] -= 1
            seq.pop()
            for table, key, old in reversed(undo):
                if old is None:
                    table.pop(key, None)
                else:
                    table[key] = old

    visit()
    return results


def correct_reorderings(execution: Execution, *, bound: int = DEFAULT_BOUND) -> set[Reordering]:
    """Well-formed, program-order closed sequences of events in which every
    read reads from the same write as in the execution."""
    _check_bound(len(execution), bound)
    return _reorderings(execution, sync_preserving=False, conflict_preserving=False)


def syncp_reorderings(execution: Execution, *, bound: int = DEFAULT_BOUND) -> set[Reordering]:
    """Correct reorderings that keep same-lock acquires in their original order."""
    _check_bound(len(execution), bound)
    return _reorderings(execution, sync_preserving=True, conflict_preserving=False)


def confp_reorderings(execution: Execution, *, bound: int = DEFAULT_BOUND) -> set[Reordering]:
    """Sync-preserving correct reorderings that also keep every conflicting
    pair of accesses in its original order."""
    _check_bound(len(execution), bound)
    return _reorderings(execution, sync_preserving=True, conflict_preserving=True)


def spell(execution: Execution, reordering: Reordering) -> tuple[Label, ...]:
    """Labels of a reordering given as event indices."""
    return tuple(execution.labels[i - 1] for i in reordering)


def enabled_events(execution: Execution, reordering: Reordering) -> frozenset[int]:
    """Events absent from ``reordering`` whose thread predecessors are all present."""
    present = set(reordering)
    out = set()
    for evs in execution.thread_events:
        for e in evs:
            if e not in present:
                out.add(e)
                break
    return frozenset(out)


CLOSURE_KINDS = ("equiv", "ideal", "strong", "rf", "creorder", "syncp", "confp")


def closure(kind: str, execution: Execution, *, bound: int = DEFAULT_BOUND) -> set[Reordering]:
    """Dispatch by name, using the read/write/lock alphabets of ``execution``."""
    dual = build_rwl_dual(execution)
    if kind == "equiv":
        return maz_equiv_class(dual.combined(), execution, bound=bound)
    if kind == "ideal":
        return ideal_closure(dual.combined(), execution, bound=bound)
    if kind == "strong":
        return strong_closure(dual, execution, bound=bound)
    if kind == "rf":
        return rf_closure(execution, bound=bound)
    if kind == "creorder":
        return correct_reorderings(execution, bound=bound)
    if kind == "syncp":
        return syncp_reorderings(execution, bound=bound)
    if kind == "confp":
        return confp_reorderings(execution, bound=bound)
    raise ValueError(f"unknown closure kind {kind!r}; expected one of {', '.join(CLOSURE_KINDS)}")
