"""Concurrent alphabets and the read/write/lock dependence family."""

from __future__ import annotations

from collections.abc import Hashable, Iterable
from dataclasses import dataclass
from itertools import product

from .trace import WRITE, Execution, Label, conflicting

Letter = Hashable
Pair = tuple[Letter, Letter]


def _symmetric(pairs: Iterable[Pair]) -> frozenset[Pair]:
    out: set[Pair] = set()
    for a, b in pairs:
        out.add((a, b))
        out.add((b, a))
    return frozenset(out)


@dataclass(frozen=True)
class ConcurrentAlphabet:
    """A finite alphabet with a reflexive, symmetric dependence relation."""

    letters: frozenset
    dependent_pairs: frozenset[Pair]

    def __post_init__(self) -> None:
        object.__setattr__(self, "letters", frozenset(self.letters))
        object.__setattr__(self, "dependent_pairs", frozenset(self.dependent_pairs))
        for a, b in self.dependent_pairs:
            if a not in self.letters or b not in self.letters:
                raise ValueError(f"pair {(a, b)!r} mentions a letter outside the alphabet")
            if (b, a) not in self.dependent_pairs:
                raise ValueError(f"dependence is not symmetric: {(a, b)!r}")
        missing = [a for a in self.letters if (a, a) not in self.dependent_pairs]
        if missing:
            raise ValueError(f"dependence is not reflexive on {missing!r}")

    @classmethod
    def from_pairs(cls, letters: Iterable[Letter], pairs: Iterable[Pair]) -> ConcurrentAlphabet:
        """Symmetric and reflexive closure of ``pairs``."""
        letters = frozenset(letters)
        return cls(letters, _symmetric(list(pairs) + [(a, a) for a in letters]))

    def dependent(self, a: Letter, b: Letter) -> bool:
        return (a, b) in self.dependent_pairs


@dataclass(frozen=True)
class DualAlphabet:
    """Strong (reflexive, symmetric) and weak (irreflexive, symmetric) dependence."""

    letters: frozenset
    strong_pairs: frozenset[Pair]
    weak_pairs: frozenset[Pair]

    def __post_init__(self) -> None:
        object.__setattr__(self, "letters", frozenset(self.letters))
        object.__setattr__(self, "strong_pairs", frozenset(self.strong_pairs))
        object.__setattr__(self, "weak_pairs", frozenset(self.weak_pairs))
        for rel in (self.strong_pairs, self.weak_pairs):
            for a, b in rel:
                if a not in self.letters or b not in self.letters:
                    raise ValueError(f"pair {(a, b)!r} mentions a letter outside the alphabet")
                if (b, a) not in rel:
                    raise ValueError(f"relation is not symmetric: {(a, b)!r}")
        if any((a, a) not in self.strong_pairs for a in self.letters):
            raise ValueError("strong dependence must be reflexive")
        if any(a == b for a, b in self.weak_pairs):
            raise ValueError("weak dependence must be irreflexive")

    @classmethod
    def from_pairs(
        cls, letters: Iterable[Letter], strong: Iterable[Pair], weak: Iterable[Pair] = ()
    ) -> DualAlphabet:
        letters = frozenset(letters)
        return cls(letters, _symmetric(list(strong) + [(a, a) for a in letters]), _symmetric(weak))

    def strong(self, a: Letter, b: Letter) -> bool:
        return (a, b) in self.strong_pairs

    def weak(self, a: Letter, b: Letter) -> bool:
        return (a, b) in self.weak_pairs

    def dependent(self, a: Letter, b: Letter) -> bool:
        return (a, b) in self.strong_pairs or (a, b) in self.weak_pairs

    def combined(self) -> ConcurrentAlphabet:
        """The Mazurkiewicz dependence ``strong | weak``."""
        return ConcurrentAlphabet(self.letters, self.strong_pairs | self.weak_pairs)

    def ideal(self) -> DualAlphabet:
        """Everything strong, nothing weak: strong prefixes become ideal prefixes."""
        return DualAlphabet(self.letters, self.strong_pairs | self.weak_pairs, frozenset())


def _letters_of(source: Iterable[Label] | Execution) -> frozenset[Label]:
    return frozenset(source.labels if isinstance(source, Execution) else source)


def rwl_dependent(a: Label, b: Label) -> bool:
    """Same thread, same lock, or conflicting accesses."""
    if a.thread == b.thread:
        return True
    if a.is_lock_op and b.is_lock_op:
        return a.operand == b.operand
    return conflicting(a, b)


def rwl_weak(a: Label, b: Label) -> bool:
    """Cross-thread same-lock operations and cross-thread write/write pairs."""
    if a.thread == b.thread:
        return False
    if a.is_lock_op and b.is_lock_op:
        return a.operand == b.operand
    return a.op == WRITE and b.op == WRITE and a.operand == b.operand


def build_rwl_dependence(letters: Iterable[Label] | Execution) -> ConcurrentAlphabet:
    letters = _letters_of(letters)
    pairs = frozenset((a, b) for a, b in product(letters, repeat=2) if rwl_dependent(a, b))
    return ConcurrentAlphabet(letters, pairs)


def build_rwl_dual(letters: Iterable[Label] | Execution) -> DualAlphabet:
    letters = _letters_of(letters)
    strong, weak = set(), set()
    for a, b in product(letters, repeat=2):
        if rwl_weak(a, b):
            weak.add((a, b))
        elif rwl_dependent(a, b):
            strong.add((a, b))
    return DualAlphabet(letters, frozenset(strong), frozenset(weak))


def width(d: DualAlphabet, observed: Iterable[Letter] | None = None) -> int:
    """Largest set of observed letters with no two strongly dependent.

    Exact maximum independent set by branch and bound; the bound is a greedy
    clique cover of the remaining candidates (each clique contributes at most
    one letter).
    """
    nodes = sorted(d.letters if observed is None else set(observed), key=repr)
    unknown = [a for a in nodes if a not in d.letters]
    if unknown:
        raise ValueError(f"letters not in alphabet: {unknown!r}")
    n = len(nodes)
    if n == 0:
        return 0
    adj = [0] * n
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if i != j and d.strong(a, b):
                adj[i] |= 1 << j

    def clique_cover_bound(cand: int) -> int:
        bound = 0
        while cand:
            bound += 1
            low = cand & -cand
            v = low.bit_length() - 1
            clique = low
            rest = cand & adj[v]
            while rest:
                u_bit = rest & -rest
                u = u_bit.bit_length() - 1
                clique |= u_bit
                rest &= adj[u]
            cand &= ~clique
        return bound

    best = 0

    def search(cand: int, size: int) -> None:
        nonlocal best
        if not cand:
            best = max(best, size)
            return
        if size + clique_cover_bound(cand) <= best:
            return
        low = cand & -cand
        v = low.bit_length() - 1
        # either take v (dropping its neighbours) or leave it out
        search(cand & ~low & ~adj[v], size + 1)
        search(cand & ~low, size)

    search((1 << n) - 1, 0)
    return best
