"""Events and executions over the read/write/lock alphabet.

An :class:`Execution` is an immutable sequence of labels plus the structures
every analysis needs: program order per thread, reads-from, the locks held at
each event and the acquire/release pairing of critical sections.  Indices are
1-based throughout, matching event positions in the recorded trace.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

READ = "r"
WRITE = "w"
ACQUIRE = "acq"
RELEASE = "rel"

OPS = (READ, WRITE, ACQUIRE, RELEASE)
ACCESS_OPS = frozenset({READ, WRITE})
LOCK_OPS = frozenset({ACQUIRE, RELEASE})


class TraceError(ValueError):
    """Raised for traces that cannot be turned into an :class:`Execution`."""


class TraceParseError(TraceError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Label:
    """A letter ``<thread, op(operand)>``.

    Labels are interned: equal labels are the same object, so hashing and
    equality are identity-based and cheap.  Ordering is by
    ``(thread, op, operand)``.
    """

    __slots__ = ("thread", "op", "operand")
    _interned: dict[tuple[str, str, str], Label] = {}

    thread: str
    op: str
    operand: str

    def __new__(cls, thread: str, op: str, operand: str) -> Label:
        key = (thread, op, operand)
        lab = cls._interned.get(key)
        if lab is None:
            if op not in OPS:
                raise TraceError(f"unknown operation {op!r}")
            lab = object.__new__(cls)
            object.__setattr__(lab, "thread", thread)
            object.__setattr__(lab, "op", op)
            object.__setattr__(lab, "operand", operand)
            lab = cls._interned.setdefault(key, lab)
        return lab

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Label is immutable")

    def __delattr__(self, name: str) -> None:
        raise AttributeError("Label is immutable")

    def __reduce__(self):
        return (Label, (self.thread, self.op, self.operand))

    def __copy__(self) -> Label:
        return self

    def __deepcopy__(self, memo: dict) -> Label:
        return self

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.thread, self.op, self.operand)

    def __lt__(self, other: Label) -> bool:
        if not isinstance(other, Label):
            return NotImplemented
        return self.key < other.key

    def __le__(self, other: Label) -> bool:
        if not isinstance(other, Label):
            return NotImplemented
        return self.key <= other.key

    def __gt__(self, other: Label) -> bool:
        if not isinstance(other, Label):
            return NotImplemented
        return self.key > other.key

    def __ge__(self, other: Label) -> bool:
        if not isinstance(other, Label):
            return NotImplemented
        return self.key >= other.key

    def __repr__(self) -> str:
        return f"Label(thread={self.thread!r}, op={self.op!r}, operand={self.operand!r})"

    @property
    def is_access(self) -> bool:
        return self.op in ACCESS_OPS

    @property
    def is_lock_op(self) -> bool:
        return self.op in LOCK_OPS

    def __str__(self) -> str:
        return f"{self.thread}|{self.op}|{self.operand}"

    @classmethod
    def parse(cls, text: str) -> Label:
        parts = [p.strip() for p in text.strip().split("|")]
        if len(parts) != 3 or not all(parts):
            raise TraceError(f"expected '<thread>|<op>|<operand>', got {text!r}")
        return cls(*parts)


def conflicting(a: Label, b: Label) -> bool:
    """Same location, at least one write (thread is not considered)."""
    return (
        a.is_access
        and b.is_access
        and a.operand == b.operand
        and WRITE in (a.op, b.op)
    )


class Event(NamedTuple):
    index: int
    label: Label


@dataclass(frozen=True, slots=True)
class SubsequenceMask:
    """The kept events of a host execution of ``length`` events."""

    length: int
    kept: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kept", frozenset(self.kept))
        if self.length < 0:
            raise ValueError("length must be non-negative")
        bad = [i for i in self.kept if not 1 <= i <= self.length]
        if bad:
            raise ValueError(f"kept indices out of range 1..{self.length}: {sorted(bad)}")

    @classmethod
    def full(cls, length: int) -> SubsequenceMask:
        return cls(length, frozenset(range(1, length + 1)))

    @classmethod
    def empty(cls, length: int) -> SubsequenceMask:
        return cls(length, frozenset())

    @classmethod
    def from_bits(cls, length: int, bits: int) -> SubsequenceMask:
        return cls(length, frozenset(i for i in range(1, length + 1) if bits >> i & 1))

    @property
    def dropped(self) -> frozenset[int]:
        return frozenset(range(1, self.length + 1)) - self.kept

    def indices(self) -> list[int]:
        return sorted(self.kept)

    def __contains__(self, index: object) -> bool:
        return index in self.kept

    def __len__(self) -> int:
        return len(self.kept)


class Execution:
    """An immutable recorded execution.

    Thread, lock and location names are interned to dense integers in order
    of first appearance: ``threads[k]`` is the name of thread ``k`` and
    ``thread_of[i]`` the thread id of event ``i``.
    """

    def __init__(self, labels: Iterable[Label]):
        labels = tuple(labels)
        self.labels: tuple[Label, ...] = labels
        threads: dict[str, int] = {}
        locks: dict[str, int] = {}
        locations: dict[str, int] = {}
        for pos, lab in enumerate(labels, 1):
            if not isinstance(lab, Label):
                raise TraceError(f"event {pos}: expected Label, got {type(lab).__name__}")
            threads.setdefault(lab.thread, len(threads))
            if lab.is_lock_op:
                if lab.operand in locations:
                    raise TraceError(
                        f"event {pos}: {lab.operand!r} used both as lock and as location"
                    )
                locks.setdefault(lab.operand, len(locks))
            else:
                if lab.operand in locks:
                    raise TraceError(
                        f"event {pos}: {lab.operand!r} used both as lock and as location"
                    )
                locations.setdefault(lab.operand, len(locations))
        self.threads = tuple(threads)
        self.locks = tuple(locks)
        self.locations = tuple(locations)

        n = len(labels)
        # index 0 is padding so that arrays can be addressed by event index
        self.thread_of: list[int] = [-1] * (n + 1)
        self.thread_events: tuple[tuple[int, ...], ...]
        self.thread_pos: list[int] = [-1] * (n + 1)
        self.rf: dict[int, int | None] = {}
        self.held: list[frozenset[str]] = [frozenset()] * (n + 1)
        self.release_of: dict[int, int | None] = {}
        self.acquire_of: dict[int, int | None] = {}

        per_thread: list[list[int]] = [[] for _ in threads]
        per_lock: dict[str, list[int]] = {lk: [] for lk in locks}
        last_write: dict[str, int] = {}
        held_by_thread: list[dict[str, int]] = [{} for _ in threads]
        for i, lab in enumerate(labels, 1):
            t = threads[lab.thread]
            self.thread_of[i] = t
            self.thread_pos[i] = len(per_thread[t])
            per_thread[t].append(i)
            open_sections = held_by_thread[t]
            self.held[i] = frozenset(open_sections)
            if lab.op == READ:
                self.rf[i] = last_write.get(lab.operand)
            elif lab.op == WRITE:
                last_write[lab.operand] = i
            elif lab.op == ACQUIRE:
                per_lock[lab.operand].append(i)
                self.release_of[i] = None
                open_sections[lab.operand] = i
            else:
                per_lock[lab.operand].append(i)
                acq = open_sections.pop(lab.operand, None)
                self.acquire_of[i] = acq
                if acq is not None:
                    self.release_of[acq] = i
        self.thread_events = tuple(tuple(evs) for evs in per_thread)
        self.lock_events = {lk: tuple(evs) for lk, evs in per_lock.items()}

    # -- basic protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.events)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Execution):
            return NotImplemented
        return self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"Execution({len(self)} events, {len(self.threads)} threads)"

    @cached_property
    def events(self) -> tuple[Event, ...]:
        return tuple(Event(i, lab) for i, lab in enumerate(self.labels, 1))

    def label(self, index: int) -> Label:
        self._check_index(index)
        return self.labels[index - 1]

    def _check_index(self, index: int) -> None:
        if not 1 <= index <= len(self.labels):
            raise IndexError(f"event index {index} out of range 1..{len(self.labels)}")

    # -- derived queries --------------------------------------------------
    def thread_predecessors(self, index: int) -> tuple[int, ...]:
        """Events of the same thread strictly before ``index``."""
        self._check_index(index)
        t = self.thread_of[index]
        return self.thread_events[t][: self.thread_pos[index]]

    def thread_predecessor(self, index: int) -> int | None:
        """The immediately preceding event of the same thread."""
        pos = self.thread_pos[index]
        return self.thread_events[self.thread_of[index]][pos - 1] if pos else None

    def acquires(self, lock: str) -> tuple[int, ...]:
        return tuple(i for i in self.lock_events.get(lock, ()) if self.labels[i - 1].op == ACQUIRE)

    def render(self) -> str:
        return "".join(f"{lab}\n" for lab in self.labels)

    def project(self, mask: SubsequenceMask) -> Execution:
        return project(self, mask)


def _structured_record(rec: object, pos: int) -> Label:
    if not isinstance(rec, dict) or set(rec) != {"t", "op", "d"}:
        raise TraceParseError(pos, 'expected record {"t", "op", "d"}')
    if rec["op"] not in OPS:
        raise TraceParseError(pos, f"unknown operation {rec['op']!r}")
    if not all(isinstance(rec[k], str) and rec[k] for k in ("t", "d")):
        raise TraceParseError(pos, "thread and operand must be non-empty strings")
    return Label(rec["t"], rec["op"], rec["d"])


def parse_trace(text: str, format: str = "std") -> Execution:
    """Parse ``text`` in ``std`` (``t|op|d`` per line) or ``structured`` (JSON) form.

    For the structured form the reported "line" of an error is the 1-based
    record number.
    """
    labels: list[Label] = []
    if format == "std":
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("|")]
            if len(parts) != 3 or not all(parts):
                raise TraceParseError(lineno, f"expected '<thread>|<op>|<operand>', got {raw!r}")
            if parts[1] not in OPS:
                raise TraceParseError(lineno, f"unknown operation {parts[1]!r}")
            labels.append(Label(*parts))
    elif format == "structured":
        try:
            records = json.loads(text) if text.strip() else []
        except json.JSONDecodeError as exc:
            raise TraceParseError(exc.lineno, exc.msg) from None
        if not isinstance(records, list):
            raise TraceParseError(1, "expected a JSON array of records")
        labels = [_structured_record(rec, pos) for pos, rec in enumerate(records, 1)]
    else:
        raise ValueError(f"unknown trace format {format!r}")
    try:
        return Execution(labels)
    except TraceParseError:
        raise
    except TraceError as exc:
        # locate the offending event's source line for the std format
        raise TraceParseError(_line_of_error(text, format, str(exc)), str(exc)) from None


def _line_of_error(text: str, format: str, message: str) -> int:
    # messages from Execution start with "event <k>:"
    try:
        k = int(message.split(":", 1)[0].split()[1])
    except (IndexError, ValueError):
        return 0
    if format != "std":
        return k
    seen = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            seen += 1
            if seen == k:
                return lineno
    return 0


def render(execution: Execution, format: str = "std") -> str:
    """Inverse of :func:`parse_trace`."""
    if format == "std":
        return execution.render()
    if format == "structured":
        return json.dumps([{"t": l.thread, "op": l.op, "d": l.operand} for l in execution.labels])
    raise ValueError(f"unknown trace format {format!r}")


def execution_of(spec: str | Sequence[str | Label]) -> Execution:
    """Build an execution from ``"t1|w|x, t2|r|x"`` or a list of labels/strings."""
    if isinstance(spec, str):
        items: Sequence[str | Label] = [s for s in spec.replace("\n", ",").split(",") if s.strip()]
    else:
        items = spec
    return Execution(lab if isinstance(lab, Label) else Label.parse(lab) for lab in items)


@dataclass(frozen=True, slots=True)
class Violation:
    index: int
    reason: str


def check_well_formed(execution: Execution | Sequence[Label]) -> Violation | None:
    """Single pass lock-discipline check; ``None`` means well-formed.

    An acquire may stay open at the end of the trace.  Re-entrant acquires
    are violations.
    """
    labels = execution.labels if isinstance(execution, Execution) else execution
    owner: dict[str, str] = {}
    for i, lab in enumerate(labels, 1):
        if lab.op == ACQUIRE:
            holder = owner.get(lab.operand)
            if holder is not None:
                suffix = " (re-entrant acquire)" if holder == lab.thread else ""
                return Violation(i, f"lock {lab.operand} already held{suffix}")
            owner[lab.operand] = lab.thread
        elif lab.op == RELEASE:
            if owner.get(lab.operand) != lab.thread:
                return Violation(i, "release without acquire")
            del owner[lab.operand]
    return None


def is_well_formed(execution: Execution | Sequence[Label]) -> bool:
    return check_well_formed(execution) is None


def reads_from(execution: Execution) -> dict[int, int | None]:
    """Map each read to the latest earlier write of its location (or ``None``)."""
    return dict(execution.rf)


def held_locks_at(execution: Execution, index: int) -> frozenset[str]:
    """Locks held by the thread of event ``index`` just before it executes."""
    execution._check_index(index)
    return execution.held[index]


def _check_mask(execution: Execution, mask: SubsequenceMask) -> None:
    if mask.length != len(execution):
        raise ValueError(f"mask length {mask.length} != execution length {len(execution)}")


def project(execution: Execution, mask: SubsequenceMask) -> Execution:
    """Kept events in execution order, reindexed from 1."""
    _check_mask(execution, mask)
    return Execution(execution.labels[i - 1] for i in sorted(mask.kept))


def enabled_in(execution: Execution, mask: SubsequenceMask, targets: Iterable[int]) -> bool:
    """Whether every target is absent from the mask but all its thread-predecessors are kept."""
    _check_mask(execution, mask)
    targets = set(targets)
    if targets & mask.kept:
        raise ValueError(f"targets {sorted(targets & mask.kept)} are kept by the mask")
    return all(
        all(p in mask.kept for p in execution.thread_predecessors(e)) for e in targets
    )
