from __future__ import annotations

import copy
import itertools
import json
import pickle
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from golden import SIG1, SIG1_TEXT, SIG2, SIG3, SIG4, SIG4_TEXT
from tracepredict.trace import (
    Event,
    Execution,
    Label,
    SubsequenceMask,
    TraceError,
    TraceParseError,
    check_well_formed,
    conflicting,
    enabled_in,
    execution_of,
    held_locks_at,
    is_well_formed,
    parse_trace,
    project,
    reads_from,
    render,
)

labels_st = st.builds(
    Label,
    st.sampled_from(["t1", "t2", "t3"]),
    st.sampled_from(["r", "w", "acq", "rel"]),
    st.sampled_from(["x", "y"]),
).map(lambda lab: Label(lab.thread, lab.op, lab.operand if lab.is_access else "l" + lab.operand))
executions_st = st.lists(labels_st, max_size=12).map(Execution)

LOCK_OPS = [Label(t, op, l) for t in ("t1", "t2") for op in ("acq", "rel") for l in ("l", "m")]


def wf_by_regex(labels) -> bool:
    """Per lock, the operations must read (acq_t rel_t)* optionally followed by one acq."""
    for lock in {lab.operand for lab in labels if lab.is_lock_op}:
        ops = "".join(
            ("A" if lab.op == "acq" else "R") + lab.thread[1:]
            for lab in labels
            if lab.is_lock_op and lab.operand == lock
        )
        if not re.fullmatch(r"(?:A(\d+)R\1)*(?:A\d+)?", ops):
            return False
    return True


class TestLabel:
    def test_interned(self):
        assert Label("t1", "w", "x") is Label("t1", "w", "x")

    def test_immutable(self):
        lab = Label("t1", "w", "x")
        with pytest.raises(AttributeError):
            lab.op = "r"

    def test_pickle_and_copy_preserve_identity(self):
        lab = Label("t1", "acq", "l")
        assert pickle.loads(pickle.dumps(lab)) is lab
        assert copy.deepcopy(lab) is lab

    def test_ordering_is_by_fields(self):
        labs = [Label("t2", "r", "x"), Label("t1", "w", "x"), Label("t1", "r", "y")]
        assert [str(l) for l in sorted(labs)] == ["t1|r|y", "t1|w|x", "t2|r|x"]

    def test_unknown_op(self):
        with pytest.raises(TraceError):
            Label("t1", "fork", "x")

    @pytest.mark.parametrize("text", ["t1|w", "t1||x", "a|b|c|d", ""])
    def test_parse_rejects(self, text):
        with pytest.raises(TraceError):
            Label.parse(text)

    def test_conflicting(self):
        w1, w2, r2 = Label("t1", "w", "x"), Label("t2", "w", "x"), Label("t2", "r", "x")
        assert conflicting(w1, w2) and conflicting(w1, r2)
        assert not conflicting(r2, Label("t3", "r", "x"))
        assert not conflicting(w1, Label("t2", "w", "y"))


class TestParse:
    def test_sig1(self):
        ex = parse_trace(SIG1_TEXT)
        assert len(ex) == 6 and len(ex.threads) == 2
        assert ex.events[3] == Event(4, Label("t2", "w", "x"))

    def test_sig4(self):
        ex = parse_trace(SIG4_TEXT)
        assert len(ex) == 7 and len(ex.threads) == 3

    def test_empty(self):
        assert len(parse_trace("")) == 0

    def test_comments_and_blank_lines(self):
        ex = parse_trace("# header\n\n t1|w|x \n# mid\nt2|r|x\n")
        assert [str(l) for l in ex.labels] == ["t1|w|x", "t2|r|x"]

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(TraceParseError) as err:
            parse_trace("t1|w|x\n# c\nt2|bogus\n")
        assert err.value.line == 3

    def test_unknown_op_reports_line_number(self):
        with pytest.raises(TraceParseError) as err:
            parse_trace("t1|w|x\nt1|lock|l\n")
        assert err.value.line == 2

    def test_lock_and_location_clash(self):
        with pytest.raises(TraceParseError) as err:
            parse_trace("t1|acq|x\n\nt1|w|x\n")
        assert err.value.line == 3

    def test_structured(self):
        recs = [{"t": "t1", "op": "w", "d": "x"}, {"t": "t2", "op": "acq", "d": "l"}]
        ex = parse_trace(json.dumps(recs), "structured")
        assert [str(l) for l in ex.labels] == ["t1|w|x", "t2|acq|l"]

    @pytest.mark.parametrize(
        "text",
        ['{"t": "t1"}', '[{"t": "t1", "op": "w"}]', '[{"t": "t1", "op": "fork", "d": "x"}]', "[1"],
    )
    def test_structured_rejects(self, text):
        with pytest.raises(TraceParseError):
            parse_trace(text, "structured")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            parse_trace("", "xml")

    @given(executions_st)
    def test_round_trip(self, ex):
        for fmt in ("std", "structured"):
            assert parse_trace(render(ex, fmt), fmt) == ex


class TestExecution:
    def test_derived_structures(self):
        assert SIG4.threads == ("t1", "t3", "t2")
        assert SIG4.thread_events == ((1, 2, 3), (4,), (5, 6, 7))
        assert SIG3.locks == ("l1", "l2")
        assert SIG3.release_of[1] == 4 and SIG3.acquire_of[3] == 2
        assert SIG3.acquires("l1") == (1, 6)

    def test_thread_predecessors(self):
        assert SIG2.thread_predecessors(6) == (4, 5)
        assert SIG2.thread_predecessor(4) is None

    def test_index_range(self):
        with pytest.raises(IndexError):
            SIG1.label(7)
        with pytest.raises(IndexError):
            held_locks_at(SIG1, 0)

    def test_equality_by_labels(self):
        assert execution_of(SIG1_TEXT) == SIG1
        assert hash(execution_of(SIG1_TEXT)) == hash(SIG1)
        assert SIG1 != SIG2

    def test_rejects_non_labels(self):
        with pytest.raises(TraceError):
            Execution(["t1|w|x"])


class TestWellFormed:
    def test_sig1(self):
        assert check_well_formed(SIG1) is None

    def test_overlap(self):
        v = check_well_formed(execution_of("t1|acq|l,t2|acq|l"))
        assert (v.index, v.reason) == (2, "lock l already held")

    def test_unmatched_release(self):
        v = check_well_formed(execution_of("t1|rel|l"))
        assert (v.index, v.reason) == (1, "release without acquire")

    def test_reentrant(self):
        v = check_well_formed(execution_of("t1|acq|l,t1|acq|l"))
        assert v.index == 2 and "re-entrant" in v.reason

    def test_release_by_other_thread(self):
        assert check_well_formed(execution_of("t1|acq|l,t2|rel|l")).index == 2

    def test_open_section_at_end(self):
        assert is_well_formed(execution_of("t1|acq|l,t1|w|x"))

    def test_example_executions(self):
        assert all(is_well_formed(s) for s in (SIG1, SIG2, SIG3, SIG4))

    @pytest.mark.parametrize("length", range(0, 6))
    def test_exhaustive_against_regex(self, length):
        for labels in itertools.product(LOCK_OPS, repeat=length):
            assert is_well_formed(labels) == wf_by_regex(labels), labels

    @given(st.lists(st.sampled_from(LOCK_OPS), max_size=10))
    def test_random_against_regex(self, labels):
        assert is_well_formed(labels) == wf_by_regex(labels)


class TestReadsFrom:
    def test_sig4(self):
        assert reads_from(SIG4) == {3: 2, 4: 2, 6: 5, 7: 1}

    def test_no_reads(self):
        assert reads_from(SIG1) == {}

    def test_initial_read(self):
        assert reads_from(execution_of("t1|r|x")) == {1: None}

    @given(executions_st)
    def test_latest_earlier_write(self, ex):
        for r, w in reads_from(ex).items():
            x = ex.label(r).operand
            writes = [i for i in range(1, r) if ex.label(i) == Label(ex.label(i).thread, "w", x)]
            assert w == (writes[-1] if writes else None)


class TestHeldLocks:
    def test_sig3(self):
        assert held_locks_at(SIG3, 2) == {"l1"}
        assert held_locks_at(SIG3, 6) == {"l2"}

    def test_first_event(self):
        assert held_locks_at(SIG1, 1) == frozenset()

    @given(executions_st.filter(is_well_formed))
    def test_matches_simulation(self, ex):
        held: dict[str, set[str]] = {}
        for i, lab in enumerate(ex.labels, 1):
            mine = held.setdefault(lab.thread, set())
            assert held_locks_at(ex, i) == mine
            if lab.op == "acq":
                mine.add(lab.operand)
            elif lab.op == "rel":
                mine.discard(lab.operand)


class TestMaskAndProject:
    def test_mask_validation(self):
        with pytest.raises(ValueError):
            SubsequenceMask(3, {0})
        with pytest.raises(ValueError):
            SubsequenceMask(3, {4})
        with pytest.raises(ValueError):
            SubsequenceMask(-1, set())

    def test_mask_helpers(self):
        m = SubsequenceMask(5, {4, 1})
        assert m.indices() == [1, 4] and m.dropped == {2, 3, 5} and 4 in m and len(m) == 2
        assert SubsequenceMask.from_bits(5, 0b10010) == m
        assert SubsequenceMask.full(3).kept == {1, 2, 3}
        assert SubsequenceMask.empty(3).kept == frozenset()

    def test_sig2_race_projection(self):
        proj = project(SIG2, SubsequenceMask(6, {4, 5, 1, 6}))
        assert [str(l) for l in proj.labels] == ["t1|w|x", "t2|acq|l", "t2|rel|l", "t2|w|x"]

    def test_sig4_rf_projection(self):
        proj = project(SIG4, SubsequenceMask(7, {1, 5, 6, 7}))
        assert [str(l) for l in proj.labels] == ["t1|w|y", "t2|w|x", "t2|r|x", "t2|r|y"]
        assert proj.rf == {3: 2, 4: 1}

    def test_identity(self):
        assert project(SIG3, SubsequenceMask.full(8)) == SIG3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            project(SIG1, SubsequenceMask.full(5))

    @given(executions_st, st.integers(min_value=0))
    def test_preserves_order(self, ex, bits):
        mask = SubsequenceMask.from_bits(len(ex), bits)
        assert project(ex, mask).labels == tuple(ex.label(i) for i in mask.indices())


class TestEnabled:
    def test_sig2(self):
        assert enabled_in(SIG2, SubsequenceMask(6, {4, 5}), {1, 6})

    def test_sig3(self):
        assert enabled_in(SIG3, SubsequenceMask(8, {1, 5}), {2, 6})

    def test_missing_predecessor(self):
        assert not enabled_in(SIG1, SubsequenceMask.empty(6), {2})

    def test_target_kept(self):
        with pytest.raises(ValueError):
            enabled_in(SIG1, SubsequenceMask(6, {1}), {1})
