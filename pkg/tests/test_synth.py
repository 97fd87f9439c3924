import numpy as np
import pytest

from recasim.classifier import Access, FeatureVector, RequestType, classify_trace, code_features
from recasim.profiles import default_table
from recasim.synth import (WORKLOADS, CategoryProfile, GenerationError, generate_category_trace,
                           generate_interleaving_workload, interleave_processes, measured_mix)


@pytest.fixture(scope="module")
def table():
    return default_table()


def test_rc_random_read_fraction(table):
    m = measured_mix(generate_category_trace(table.get("random_consumers"), 100_000, 7))
    assert 0.80 <= m["rndR"] <= 0.90


@pytest.mark.parametrize("name", [r.name for r in default_table()])
def test_mix_fidelity(table, name):
    rec = table.get(name)
    tr = generate_category_trace(rec, 100_000, 3)
    got = measured_mix(tr).as_array()
    assert np.abs(got - rec.signature.as_array()).max() <= 0.05
    assert int((tr.offset + tr.length).max()) <= rec.gen.working_set_pages * 4096


def test_pure_sequential_profile():
    prof = CategoryProfile("seq", FeatureVector((1.0, 0, 0, 0, 0, 0), 0.0), working_set_pages=1 << 16,
                           file_count=16, mean_file_pages=64)
    tr = generate_category_trace(prof, 5000, 1)
    assert measured_mix(tr)["seqR"] >= 0.98
    assert (tr.op == 0).all()


def test_deterministic(table):
    rec = table.get("large_file_generators")
    assert generate_category_trace(rec, 2000, 5) == generate_category_trace(rec, 2000, 5)
    assert generate_category_trace(rec, 2000, 5) != generate_category_trace(rec, 2000, 6)


def test_infeasible_inputs_rejected(table):
    with pytest.raises(GenerationError):
        generate_category_trace(table.get("random_consumers"), 999, 1)
    full_over = CategoryProfile("x", FeatureVector((0, 0, 0, 0, 1.0, 0), 1.0), working_set_pages=1)
    with pytest.raises(GenerationError):
        generate_category_trace(full_over, 1000, 1)
    tiny = CategoryProfile("x", FeatureVector((0, 0, 0, 0, 1.0, 0), 0.1), working_set_pages=100, file_count=0)
    with pytest.raises(GenerationError):
        generate_category_trace(tiny, 1000, 1)
    with pytest.raises(GenerationError):
        CategoryProfile("x", FeatureVector((0.5, 0, 0, 0, 0.4, 0), 0.0))


def test_w1_layout():
    t = generate_interleaving_workload("W1", 1)
    assert len(t) == 40_000 and (t.length == 4096).all()
    assert list(t.offset[:20_000] // 4096) == list(range(20_000))


def test_w2_alternates():
    t = generate_interleaving_workload("W2", 1)
    pages = t.offset // 4096
    assert len(t) == 40_000
    assert list(pages[0:40000:2]) == list(range(20_000))


def test_w5_counts():
    t = generate_interleaving_workload("W5", 1)
    assert len(t) == 30_000
    # the sequential stream continues alone once the random one is exhausted
    assert list(t.offset[20_000:] // 4096) == list(range(10_000, 20_000))


@pytest.mark.parametrize("name,n", [("W1", 40000), ("W2", 40000), ("W3", 40000), ("W4", 40000),
                                    ("W5", 30000), ("W6", 30000), ("W7", 30000), ("W8", 30000)])
def test_workload_sizes(name, n):
    assert len(generate_interleaving_workload(name, 2)) == n


def test_unknown_workload():
    with pytest.raises(GenerationError):
        generate_interleaving_workload("W9", 1)
    assert set(WORKLOADS) == {f"W{i}" for i in range(1, 9)}


def test_interleave_processes_keeps_order_and_separates_addresses(table):
    a = generate_category_trace(table.get("archival_consumers"), 2000, 1)
    b = generate_category_trace(table.get("sequential_producer_consumers"), 3000, 2)
    m = interleave_processes([a, b], 3)
    assert len(m) == 5000 and m.pids == [1, 2]
    assert list(m.offset[m.pid == 1]) == list(a.offset)
    assert m.offset[m.pid == 2].min() >= (a.offset + a.length).max()
