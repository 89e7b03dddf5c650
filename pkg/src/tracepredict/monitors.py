"""Deterministic acceptors answering trace-equivalence prediction questions.

A :class:`Monitor` reads labels one at a time.  Its verdict on a word ``w``
means "some string Mazurkiewicz-equivalent to ``w`` lies in the target
language", where equivalence is taken w.r.t. the dependence the monitor was
built for.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

from .alphabet import ConcurrentAlphabet
from .trace import ACQUIRE, RELEASE, Label

SUBSEQUENCE = "subsequence"
ADJACENT = "adjacent"


class Monitor(ABC):
    """One-pass (or buffering) acceptor with explicit, immutable states."""

    one_pass: bool = True
    # labels the monitor can read; None means any label
    letters: frozenset[Label] | None = None
    # labels every accepted word contains; lets callers skip hopeless runs
    required: frozenset[Label] = frozenset()

    @abstractmethod
    def init(self) -> Any: ...

    @abstractmethod
    def step(self, state: Any, label: Label) -> Any: ...

    @abstractmethod
    def accepting(self, state: Any) -> bool: ...

    def run(self, labels: Iterable[Label]) -> Any:
        state = self.init()
        for lab in labels:
            state = self.step(state, lab)
        return state

    def accepts(self, labels: Iterable[Label]) -> bool:
        return self.accepting(self.run(labels))

    def witness(self, state: Any) -> tuple[int, ...] | None:
        """1-based stream positions of the matched events, if the monitor tracks them."""
        return None


class OrderSummary:
    """Online summary of the partial order induced by a dependence relation.

    For each processed event ``e`` the vector ``V_e`` holds, per letter ``b``,
    the largest index of a ``b``-labelled event below ``e`` (0 if none).
    Then ``f`` is below ``e`` iff ``V_e[lbl f] >= index f``.
    """

    def __init__(self, d: ConcurrentAlphabet):
        self.letters = sorted(d.letters, key=repr)
        self.ids = {a: i for i, a in enumerate(self.letters)}
        self.deps = [
            tuple(j for j, b in enumerate(self.letters) if d.dependent(a, b)) for a in self.letters
        ]
        self._zero = (0,) * len(self.letters)

    def initial(self) -> tuple[tuple[int, ...], ...]:
        return (self._zero,) * len(self.letters)

    def advance(
        self, last: tuple[tuple[int, ...], ...], label: Label, index: int
    ) -> tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]:
        """Vector of the new event and the updated per-letter table."""
        a = self.ids[label]
        vecs = [last[c] for c in self.deps[a]]
        v = list(map(max, *vecs)) if len(vecs) > 1 else list(vecs[0])
        v[a] = index
        vec = tuple(v)
        return vec, last[:a] + (vec,) + last[a + 1 :]

    def vectors(self, labels: Sequence[Label]) -> list[tuple[int, ...]]:
        """``V_e`` for every event, 1-based (entry 0 is unused)."""
        last = self.initial()
        out: list[tuple[int, ...]] = [self._zero]
        for i, lab in enumerate(labels, 1):
            vec, last = self.advance(last, lab, i)
            out.append(vec)
        return out

    def below(self, vec: tuple[int, ...], label: Label, index: int) -> bool:
        return vec[self.ids[label]] >= index


@dataclass(frozen=True)
class PatternSpec:
    letters: tuple[Label, ...]
    kind: str = SUBSEQUENCE

    def __post_init__(self) -> None:
        object.__setattr__(self, "letters", tuple(self.letters))
        if not self.letters:
            raise ValueError("pattern must have at least one letter")
        if self.kind not in (SUBSEQUENCE, ADJACENT):
            raise ValueError(f"unknown match kind {self.kind!r}")
        if self.kind == ADJACENT and len(self.letters) < 2:
            raise ValueError("adjacent matching needs at least two letters")

    @classmethod
    def parse(cls, text: str, kind: str = SUBSEQUENCE) -> PatternSpec:
        return cls(tuple(Label.parse(s) for s in text.split(",") if s.strip()), kind)

    def __str__(self) -> str:
        return ",".join(map(str, self.letters))


class PatternMonitor(Monitor):
    """Is there an equivalent word containing the pattern as a subsequence?

    Keeps a deduplicated set of partial matches; a partial match maps pattern
    positions to chosen event indices (0 = unfilled).  A new event may fill
    position ``k`` iff no already chosen event at a later position is below it.
    """

    def __init__(self, d: ConcurrentAlphabet, pattern: PatternSpec | Sequence[Label]):
        if not isinstance(pattern, PatternSpec):
            pattern = PatternSpec(tuple(pattern))
        if pattern.kind != SUBSEQUENCE:
            raise ValueError("PatternMonitor matches subsequences; use block_monitor for adjacency")
        self.summary = OrderSummary(d)
        self.letters = frozenset(d.letters)
        self.pattern = pattern.letters
        self.required = frozenset(self.pattern)
        self._pids = [self.summary.ids.get(a) for a in self.pattern]
        self._positions: dict[Label, tuple[int, ...]] = {}
        for k, a in enumerate(self.pattern):
            self._positions[a] = self._positions.get(a, ()) + (k,)
        self._empty = (0,) * len(self.pattern)

    # state: (events seen, per-letter vectors, partial matches, completed match or None)
    def init(self):
        return (0, self.summary.initial(), frozenset(), None)

    def step(self, state, label: Label):
        count, last, partials, done = state
        index = count + 1
        vec, last = self.summary.advance(last, label, index)
        if done is not None:
            return (index, last, partials, done)
        positions = self._positions.get(label)
        if positions:
            grown = set(partials)
            pids = self._pids
            for p in (self._empty, *partials):
                for k in positions:
                    if p[k]:
                        continue
                    if any(p[q] and vec[pids[q]] >= p[q] for q in range(k + 1, len(p))):
                        continue
                    q = p[:k] + (index,) + p[k + 1 :]
                    if 0 not in q:
                        return (index, last, frozenset(grown), q)
                    grown.add(q)
            partials = frozenset(grown)
        return (index, last, partials, done)

    def run(self, labels: Iterable[Label]):
        # same transitions as repeated step(), without the per-event state tuples
        count, last, partials, done = self.init()
        summary = self.summary
        positions_of = self._positions
        pids = self._pids
        d = len(self.pattern)
        live: set[tuple[int, ...]] = set(partials)
        for lab in labels:
            count += 1
            vec, last = summary.advance(last, lab, count)
            if done is not None:
                continue
            positions = positions_of.get(lab)
            if not positions:
                continue
            for p in (self._empty, *tuple(live)):
                for k in positions:
                    if p[k] or any(p[q] and vec[pids[q]] >= p[q] for q in range(k + 1, d)):
                        continue
                    q = p[:k] + (count,) + p[k + 1 :]
                    if 0 not in q:
                        done = q
                        break
                    live.add(q)
                if done is not None:
                    break
        return (count, last, frozenset(live), done)

    def accepting(self, state) -> bool:
        return state[3] is not None

    def witness(self, state):
        return state[3]

    def live_states(self, state) -> int:
        return len(state[2])


class BlockMonitor(Monitor):
    """Is there an equivalent word in which the pattern occurs as a contiguous block?

    Buffers the input and decides offline.  Events ``f_1..f_d`` can be made
    contiguous, in order, iff no ``f_j`` (j > i) is below ``f_i`` and no event
    outside the block lies strictly between two block events.
    """

    one_pass = False

    def __init__(self, d: ConcurrentAlphabet, letters: Sequence[Label]):
        letters = tuple(letters)
        if len(letters) < 2:
            raise ValueError("a block needs at least two letters")
        self.d = d
        self.pattern = letters
        self.summary = OrderSummary(d)
        self.letters = frozenset(d.letters)
        self.required = frozenset(letters)
        self._decide = lru_cache(maxsize=256)(self._decide_uncached)

    def init(self):
        return ()

    def step(self, state, label: Label):
        return state + (label,)

    def run(self, labels: Iterable[Label]):
        return tuple(labels)

    def accepting(self, state) -> bool:
        return self._decide(state) is not None

    def witness(self, state):
        return self._decide(state)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_decide"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._decide = lru_cache(maxsize=256)(self._decide_uncached)

    def _decide_uncached(self, labels: tuple[Label, ...]) -> tuple[int, ...] | None:
        if len(self.pattern) == 2 and self.pattern[0] != self.pattern[1]:
            return _adjacent_pair(self.summary, labels, *self.pattern)
        return _block(self.summary, labels, self.pattern)


def _adjacent_pair(
    summary: OrderSummary, labels: Sequence[Label], a: Label, b: Label
) -> tuple[int, int] | None:
    if a not in summary.ids or b not in summary.ids:
        return None
    V = summary.vectors(labels)
    ia, ib = summary.ids[a], summary.ids[b]
    a_events = [i for i, lab in enumerate(labels, 1) if lab == a]
    if not a_events:
        return None
    for e2, lab in enumerate(labels, 1):
        if lab != b:
            continue
        v2 = V[e2]
        for e1 in a_events:
            # concurrent pair: neither below the other
            if e1 < e2 and v2[ia] < e1:
                return (e1, e2)
            if e1 > e2 and V[e1][ib] < e2:
                return (e1, e2)
        # otherwise only the latest a-event below e2 can be its immediate predecessor
        e1 = v2[ia]
        if e1 and all(
            not (V[z][ia] >= e1 and v2[summary.ids[labels[z - 1]]] >= z)
            for z in range(e1 + 1, e2)
        ):
            return (e1, e2)
    return None


def _block(
    summary: OrderSummary, labels: Sequence[Label], pattern: Sequence[Label]
) -> tuple[int, ...] | None:
    if any(a not in summary.ids for a in pattern):
        return None
    V = summary.vectors(labels)
    ids = summary.ids
    n = len(labels)

    def below(f: int, e: int) -> bool:
        return f != e and V[e][ids[labels[f - 1]]] >= f

    candidates = [[i for i in range(1, n + 1) if labels[i - 1] == a] for a in pattern]
    chosen: list[int] = []

    def convex() -> bool:
        block = set(chosen)
        lo, hi = min(block), max(block)
        for z in range(lo + 1, hi):
            if z in block:
                continue
            if any(below(f, z) for f in block if f < z) and any(below(z, g) for g in block if g > z):
                return False
        return True

    def search(k: int) -> bool:
        if k == len(pattern):
            return convex()
        for e in candidates[k]:
            if e in chosen or any(below(e, f) for f in chosen):
                continue
            chosen.append(e)
            if search(k + 1):
                return True
            chosen.pop()
        return False

    return tuple(chosen) if search(0) else None


class WellFormednessMonitor(Monitor):
    """Accepts exactly the well-formed prefixes (one owner per lock, no re-entry)."""

    def __init__(self, locks: Iterable[str] | None = None):
        self.locks = None if locks is None else frozenset(locks)

    # state: (ok, frozenset of (lock, owner))
    def init(self):
        return (True, frozenset())

    def step(self, state, label: Label):
        ok, owners = state
        if not ok or not label.is_lock_op:
            return state
        if self.locks is not None and label.operand not in self.locks:
            return state
        held = dict(owners)
        if label.op == ACQUIRE:
            if label.operand in held:
                return (False, owners)
            return (True, owners | {(label.operand, label.thread)})
        if held.get(label.operand) != label.thread:
            return (False, owners)
        return (True, owners - {(label.operand, label.thread)})

    def accepting(self, state) -> bool:
        return state[0]


class ConstantMonitor(Monitor):
    def __init__(self, verdict: bool):
        self.verdict = verdict

    def init(self):
        return None

    def step(self, state, label):
        return None

    def accepting(self, state) -> bool:
        return self.verdict


class Conjunction(Monitor):
    def __init__(self, first: Monitor, second: Monitor):
        self.first = first
        self.second = second
        self.one_pass = first.one_pass and second.one_pass
        known = [m.letters for m in (first, second) if m.letters is not None]
        self.letters = frozenset.intersection(*known) if known else None
        self.required = first.required | second.required

    def init(self):
        return (self.first.init(), self.second.init())

    def step(self, state, label: Label):
        return (self.first.step(state[0], label), self.second.step(state[1], label))

    def accepting(self, state) -> bool:
        return self.first.accepting(state[0]) and self.second.accepting(state[1])

    def witness(self, state):
        return self.second.witness(state[1]) or self.first.witness(state[0])


def pattern_monitor(d: ConcurrentAlphabet, pattern: PatternSpec | Sequence[Label]) -> Monitor:
    if isinstance(pattern, PatternSpec) and pattern.kind == ADJACENT:
        return BlockMonitor(d, pattern.letters)
    return PatternMonitor(d, pattern)


def adjacency_monitor(d: ConcurrentAlphabet, a: Label, b: Label) -> BlockMonitor:
    if a == b:
        raise ValueError("adjacency needs two distinct labels")
    return BlockMonitor(d, (a, b))


def block_monitor(d: ConcurrentAlphabet, letters: Sequence[Label]) -> BlockMonitor:
    return BlockMonitor(d, letters)


def wf_monitor(locks: Iterable[str] | None = None) -> WellFormednessMonitor:
    return WellFormednessMonitor(locks)


def conjoin(m1: Monitor, m2: Monitor) -> Conjunction:
    return Conjunction(m1, m2)


def accept_all() -> ConstantMonitor:
    return ConstantMonitor(True)


def reject_all() -> ConstantMonitor:
    return ConstantMonitor(False)
