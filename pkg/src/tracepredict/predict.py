"""Predictive monitoring by lifting a base monitor to prefix closures.

A prefix of an execution is represented concretely as a
:class:`~tracepredict.trace.SubsequenceMask`.  Every strong prefix is
equivalent (swapping only independent neighbours) to the projection of the
execution onto a strongly downward-closed mask, so running the base monitor on
each such projection decides whether *some* prefix is accepted.  The
reads-from variant additionally allows dropping events that are neither
thread-predecessors nor write sources of a kept event.

Two strategies are offered: exhaustive enumeration of all valid masks, one per
antichain of generator events, and seeded random sampling.
"""

from __future__ import annotations

import random
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import islice

from .alphabet import DualAlphabet, build_rwl_dependence, build_rwl_dual, width
from .monitors import Monitor
from .trace import READ, WRITE, Execution, Label, SubsequenceMask, check_well_formed

MAZ = "maz"
STRONG = "strong"
STRONG_RF = "strong-rf"
CLOSURE_MODES = (MAZ, STRONG, STRONG_RF)

DEFAULT_DROP_PROBABILITY = 0.25

StrongRelation = Callable[[Label, Label], bool]


@dataclass(frozen=True)
class Sampling:
    seed: int
    budget: int
    drop_probability: float = DEFAULT_DROP_PROBABILITY

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError("sampling budget must be at least 1")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop probability must lie in [0, 1]")


@dataclass(frozen=True)
class PredictMode:
    """Which closure to search, whether to enforce lock discipline on the
    candidates, and how to search (``sampling=None`` is exhaustive)."""

    closure: str = STRONG
    retrofit: bool = True
    sampling: Sampling | None = None

    def __post_init__(self) -> None:
        if self.closure not in CLOSURE_MODES:
            raise ValueError(f"unknown closure mode {self.closure!r}; expected one of {CLOSURE_MODES}")

    @property
    def exhaustive(self) -> bool:
        return self.sampling is None


@dataclass(frozen=True)
class Verdict:
    found: bool
    mask: SubsequenceMask | None = None
    # matched events as indices of the original execution, when the monitor reports them
    witness: tuple[int, ...] | None = None
    masks_explored: int = 0
    stats: dict = field(default_factory=dict, compare=False)

    def __bool__(self) -> bool:
        return self.found


def _strong_of(execution: Execution, strong: StrongRelation | DualAlphabet | None) -> StrongRelation:
    if strong is None:
        return build_rwl_dual(execution).strong
    if isinstance(strong, DualAlphabet):
        return strong.strong
    return strong


def _check_length(execution: Execution, mask: SubsequenceMask) -> None:
    if mask.length != len(execution):
        raise ValueError(f"mask length {mask.length} != execution length {len(execution)}")


def valid_strong_mask(
    execution: Execution,
    mask: SubsequenceMask,
    strong: StrongRelation | DualAlphabet | None = None,
) -> bool:
    """No kept event is strongly dependent on an earlier dropped one."""
    _check_length(execution, mask)
    rel = _strong_of(execution, strong)
    dropped: set[Label] = set()
    for i, lab in enumerate(execution.labels, 1):
        if i in mask.kept:
            if any(rel(d, lab) for d in dropped):
                return False
        else:
            dropped.add(lab)
    return True


def valid_rf_mask(execution: Execution, mask: SubsequenceMask) -> bool:
    """Kept events keep their thread-predecessors and the writes they read from."""
    _check_length(execution, mask)
    thread_dropped = [False] * len(execution.threads)
    source_dropped: dict[str, bool] = {}
    for i, lab in enumerate(execution.labels, 1):
        t = execution.thread_of[i]
        if i in mask.kept:
            if thread_dropped[t]:
                return False
            if lab.op == READ and source_dropped.get(lab.operand, False):
                return False
            if lab.op == WRITE:
                source_dropped[lab.operand] = False
        else:
            thread_dropped[t] = True
            if lab.op == WRITE:
                source_dropped[lab.operand] = True
    return True


# -- enumeration -------------------------------------------------------------


def _strong_down(execution: Execution, rel: StrongRelation) -> list[int]:
    """Bitset per event of the events it transitively depends on (itself included)."""
    labels = execution.labels
    down = [0] * (len(labels) + 1)
    for e in range(1, len(labels) + 1):
        bits = 1 << e
        a = labels[e - 1]
        for f in range(1, e):
            if not bits >> f & 1 and rel(labels[f - 1], a):
                bits |= down[f]
        down[e] = bits
    return down


def _rf_down(execution: Execution) -> list[int]:
    down = [0] * (len(execution) + 1)
    for e in range(1, len(execution) + 1):
        bits = 1 << e
        p = execution.thread_predecessor(e)
        if p is not None:
            bits |= down[p]
        src = execution.rf.get(e)
        if src is not None:
            bits |= down[src]
        down[e] = bits
    return down


def _ideal_bits(down: list[int], arity: int) -> Iterator[int]:
    """Downward-closed sets, one per antichain of at most ``arity`` generators.

    Generator tuples are visited depth-first in lexicographic order, starting
    with the empty tuple.  The generators of a set are exactly its maximal
    elements, so no set is produced twice.
    """
    n = len(down) - 1

    def extend_exact(start: int, gens: tuple[int, ...], bits: int) -> Iterator[int]:
        yield bits
        if len(gens) == arity:
            return
        for g in range(start, n + 1):
            dg = down[g]
            if any(dg >> h & 1 for h in gens):
                continue
            yield from extend_exact(g + 1, gens + (g,), bits | dg)

    return extend_exact(1, (), 0)


def _mask(n: int, bits: int) -> SubsequenceMask:
    return SubsequenceMask.from_bits(n, bits)


def enumerate_strong_ideals(
    execution: Execution,
    strong: StrongRelation | DualAlphabet | None = None,
    alpha: int | None = None,
) -> Iterator[SubsequenceMask]:
    """Every strongly downward-closed event set, exactly once.

    ``alpha`` bounds the number of generators; it defaults to the width of the
    strong relation over the execution's labels, which is always sufficient.
    A smaller value yields only the sets with at most ``alpha`` maximal events.
    """
    if alpha is None:
        dual = strong if isinstance(strong, DualAlphabet) else None
        if dual is None:
            dual = _dual_for(execution, _strong_of(execution, strong))
        alpha = max(1, width(dual, set(execution.labels)))
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    n = len(execution)
    down = _strong_down(execution, _strong_of(execution, strong))
    for bits in _ideal_bits(down, alpha):
        yield _mask(n, bits)


def enumerate_rf_ideals(execution: Execution) -> Iterator[SubsequenceMask]:
    """Every event set closed under thread-predecessors and write sources of reads.

    At most one maximal event per thread, so the thread count bounds the
    generator arity.
    """
    n = len(execution)
    arity = max(1, len(execution.threads))
    for bits in _ideal_bits(_rf_down(execution), arity):
        yield _mask(n, bits)


def _dual_for(execution: Execution, rel: StrongRelation) -> DualAlphabet:
    letters = set(execution.labels)
    return DualAlphabet.from_pairs(letters, [(a, b) for a in letters for b in letters if rel(a, b)])


def _masks_bits(execution: Execution, closure: str) -> Iterator[int]:
    if closure == STRONG:
        dual = build_rwl_dual(execution)
        down = _strong_down(execution, dual.strong)
        return _ideal_bits(down, max(1, width(dual, set(execution.labels))))
    if closure == STRONG_RF:
        return _ideal_bits(_rf_down(execution), max(1, len(execution.threads)))
    return iter([(1 << (len(execution) + 1)) - 2])


# -- sampling ----------------------------------------------------------------


def _sample_bits(
    execution: Execution, closure: str, rng: random.Random, p: float, rel: StrongRelation
) -> int:
    labels = execution.labels
    kept = 0
    if closure == STRONG:
        dropped: set[Label] = set()
        for i, lab in enumerate(labels, 1):
            forced = any(rel(d, lab) for d in dropped)
            if forced or rng.random() < p:
                dropped.add(lab)
            else:
                kept |= 1 << i
        return kept
    thread_dropped = [False] * len(execution.threads)
    for i, lab in enumerate(labels, 1):
        t = execution.thread_of[i]
        src = execution.rf.get(i)
        forced = thread_dropped[t] or (src is not None and not kept >> src & 1)
        if forced or rng.random() < p:
            thread_dropped[t] = True
        else:
            kept |= 1 << i
    return kept


def _sample_bit_stream(execution: Execution, mode: PredictMode, sampling: Sampling) -> Iterator[int]:
    n = len(execution)
    yield (1 << (n + 1)) - 2
    rng = random.Random(sampling.seed)
    rel = build_rwl_dual(execution).strong
    for _ in range(sampling.budget - 1):
        yield _sample_bits(execution, mode.closure, rng, sampling.drop_probability, rel)


def sample_masks(
    execution: Execution, mode: PredictMode, seed: int | None = None, budget: int | None = None
) -> Iterator[SubsequenceMask]:
    """Seeded stream of ``budget`` valid masks, the all-kept mask first.

    Each event is dropped with the configured probability; events whose
    retention would make the mask invalid are dropped as well.
    """
    sampling = mode.sampling
    if sampling is None:
        if seed is None or budget is None:
            raise ValueError("sampling needs a seed and a budget")
        sampling = Sampling(seed, budget)
    elif seed is not None or budget is not None:
        sampling = Sampling(
            sampling.seed if seed is None else seed,
            sampling.budget if budget is None else budget,
            sampling.drop_probability,
        )
    if mode.closure == MAZ:
        raise ValueError("maz mode does not sample prefixes")
    n = len(execution)
    for bits in _sample_bit_stream(execution, mode, sampling):
        yield _mask(n, bits)


# -- prediction --------------------------------------------------------------


def _check_monitor(execution: Execution, monitor: Monitor) -> None:
    letters = getattr(monitor, "letters", None)
    if letters is None:
        return
    missing = set(execution.labels) - set(letters)
    if missing:
        sample = ", ".join(sorted(map(str, missing))[:3])
        raise ValueError(f"monitor alphabet does not cover the execution's labels ({sample})")


Hit = tuple[int, tuple[int, ...], tuple[int, ...]]  # position, kept events, witness


def _evaluate(
    labels: tuple[Label, ...],
    monitors: list[Monitor],
    pending: list[int],
    retrofit: bool,
    pos: int,
    bits: int,
) -> dict[int, Hit]:
    """Run the pending monitors on the projection of ``bits``."""
    kept = tuple(i for i in range(1, len(labels) + 1) if bits >> i & 1)
    word = [labels[i - 1] for i in kept]
    if retrofit and check_well_formed(word) is not None:
        return {}
    hits = {}
    present = set(word)
    for k in pending:
        monitor = monitors[k]
        if not monitor.required <= present:
            continue
        state = monitor.run(word)
        if monitor.accepting(state):
            local = monitor.witness(state)
            hits[k] = (pos, kept, tuple(kept[j - 1] for j in local) if local else ())
    return hits


def _evaluate_chunk(args) -> dict[int, Hit]:
    labels, monitors, retrofit, chunk = args
    pending = list(range(len(monitors)))
    found: dict[int, Hit] = {}
    for pos, bits in chunk:
        hits = _evaluate(labels, monitors, pending, retrofit, pos, bits)
        if hits:
            found.update(hits)
            pending = [k for k in pending if k not in hits]
            if not pending:
                break
    return found


class _Counter:
    def __init__(self, stream: Iterator[int]):
        self._stream = stream
        self.count = 0

    def __iter__(self):
        return self

    def __next__(self) -> int:
        item = next(self._stream)
        self.count += 1
        return item


def _chunks(stream: Iterator[int], size: int) -> Iterator[list[tuple[int, int]]]:
    numbered = enumerate(stream)
    while True:
        chunk = list(islice(numbered, size))
        if not chunk:
            return
        yield chunk


def predict_all(
    execution: Execution,
    monitors: Sequence[Monitor],
    mode: PredictMode | str = STRONG,
    *,
    workers: int = 1,
) -> list[Verdict]:
    """One verdict per monitor, sharing the mask stream and the retrofit check.

    Each monitor's verdict is exactly what :func:`predict` would return for it
    alone.
    """
    if isinstance(mode, str):
        mode = PredictMode(mode)
    monitors = list(monitors)
    for monitor in monitors:
        _check_monitor(execution, monitor)
    labels = execution.labels
    n = len(labels)
    if mode.closure == MAZ or mode.sampling is None:
        stream = _masks_bits(execution, mode.closure)
    else:
        stream = _sample_bit_stream(execution, mode, mode.sampling)

    found: dict[int, Hit] = {}
    counted = _Counter(stream)
    if workers <= 1:
        pending = list(range(len(monitors)))
        for pos, bits in enumerate(counted):
            if not pending:
                break
            hits = _evaluate(labels, monitors, pending, mode.retrofit, pos, bits)
            if hits:
                found.update(hits)
                pending = [k for k in pending if k not in hits]
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        try:
            jobs = ((labels, monitors, mode.retrofit, chunk) for chunk in _chunks(counted, 64))
            # results arrive in submission order, so the earliest hit per monitor wins
            for hits in pool.map(_evaluate_chunk, jobs):
                for k, hit in hits.items():
                    found.setdefault(k, hit)
                if len(found) == len(monitors):
                    break
        finally:
            pool.shutdown(wait=True, cancel_futures=True)

    verdicts = []
    for k in range(len(monitors)):
        if k in found:
            pos, kept, witness = found[k]
            mask = SubsequenceMask(n, frozenset(kept))
            verdicts.append(Verdict(True, mask, witness or None, pos + 1))
        else:
            verdicts.append(Verdict(False, masks_explored=counted.count))
    return verdicts


def predict(
    execution: Execution, monitor: Monitor, mode: PredictMode | str = STRONG, *, workers: int = 1
) -> Verdict:
    """Search the closure selected by ``mode`` for a prefix the monitor accepts.

    The monitor must be built for the full read/write/lock dependence of the
    execution's labels.  With the exhaustive strategy the first witness in
    enumeration order is reported, independently of ``workers``.
    """
    return predict_all(execution, [monitor], mode, workers=workers)[0]


def rwl_monitor_alphabet(execution: Execution):
    """The dependence a base monitor should be built for (identical in all modes)."""
    return build_rwl_dependence(execution)
