import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recasim.classifier import Access, RequestType
from recasim.priority import PriorityTable, priority_calc, rescale_for_line_size
from recasim.profiles import default_table, load_table

TBL = default_table()
RC = TBL.get("random_consumers")
RPC = TBL.get("random_producer_consumers")
KIB = 1024


def code(access, rw=0, over=False):
    return RequestType(access, over, rw).code


def test_priority_calc_examples():
    assert priority_calc(code(Access.RANDOM), RC) == 12
    assert priority_calc(code(Access.SEQUENTIAL, 1), RC) == 1
    assert priority_calc(code(Access.STRIDED, 0, True), RC) == 6


def test_accumulate_and_cap():
    t = PriorityTable(RC, 4096, max_entries=2)
    assert t.accumulate(0, code(Access.RANDOM)) == 12
    assert t.accumulate(0, code(Access.RANDOM)) == 24
    t.accumulate(4096, code(Access.SEQUENTIAL))
    t.accumulate(8192, code(Access.STRIDED))
    assert len(t) == 2 and 4096 not in t and 0 in t


def test_switch_category_recomputes_from_counters():
    t = PriorityTable(RC, 4096, 10)
    t.accumulate(0, code(Access.RANDOM))
    t.accumulate(0, code(Access.RANDOM))
    t.switch_category(RPC)
    assert t.get(0) == 2 * 16
    t.switch_category(RPC)
    assert t.get(0) == 32


def test_shrink_priority_eight_16k_line():
    t = PriorityTable(RC, 16 * KIB, 100)
    t.prio[0] = 8.0
    t.counts[0] = [0, 0, 0, 0, 0, 0, 0]
    t._rebuild_heap()
    rescale_for_line_size(t, 16 * KIB, 4 * KIB)
    assert [t.get(a) for a in (0, 4096, 8192, 12288)] == [2.0, 2.0, 2.0, 2.0]


def test_grow_sums_siblings():
    t = PriorityTable(RC, 4096, 100)
    for i, p in enumerate([1, 2, 3, 4]):
        t.prio[i * 4096] = float(p)
        t.counts[i * 4096] = [0.0] * 7
    t._rebuild_heap()
    t.rescale(16 * KIB)
    assert dict(t.prio) == {0: 10.0}


def test_rescale_requires_matching_size():
    t = PriorityTable(RC, 4096, 10)
    with pytest.raises(ValueError):
        rescale_for_line_size(t, 8192, 4096)


ops = st.lists(st.tuples(st.integers(0, 200), st.integers(0, 13).filter(lambda c: c & 7 < 6)), max_size=200)


@given(ops)
def test_priority_is_recomputable(events):
    t = PriorityTable(RPC, 4096, 1000)
    for page, c in events:
        t.accumulate(page * 4096, c)
    for a in t.prio:
        assert t.get(a) == t.recompute(a)


@given(ops)
def test_round_trip_128k_4k_128k_conserves_mass(events):
    t = PriorityTable(RC, 128 * KIB, 10**6)
    for page, c in events:
        t.accumulate(page * 128 * KIB, c)
    before = dict(t.prio)
    total = t.total()
    t.rescale(4 * KIB)
    assert t.total() == pytest.approx(total, rel=1e-9, abs=0)
    t.rescale(128 * KIB)
    assert t.total() == pytest.approx(total, rel=1e-9, abs=0)
    assert t.prio == before
    for a in t.prio:
        assert t.get(a) == t.recompute(a)


@given(ops, st.integers(1, 50))
def test_size_never_exceeds_cap(events, cap):
    t = PriorityTable(RC, 4096, cap)
    for page, c in events:
        t.accumulate(page * 4096, c)
        assert len(t) <= cap
    t.rescale(1024 * 1024 // 8, max_entries=cap)
    assert len(t) <= cap


def test_fractional_weights_conserve_within_tolerance():
    text = open(__file__.replace("test_priority.py", "../src/recasim/data/default_table.ini")).read()
    tbl = load_table(text.replace("pr.rw.random.r = 8", "pr.rw.random.r = 8.3"))
    t = PriorityTable(tbl.get("random_producer_consumers"), 128 * KIB, 10**6)
    rng = np.random.default_rng(0)
    for p in rng.integers(0, 50, 500):
        t.accumulate(int(p) * 128 * KIB, 4)
    total = t.total()
    t.rescale(4096)
    t.rescale(128 * KIB)
    assert abs(t.total() - total) <= 1e-9 * total
