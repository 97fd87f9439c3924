import pytest
from hypothesis import given
from hypothesis import strategies as st

from recasim.device import DeviceModel, DeviceParams, DeviceState, hdd_latency, load_device_params, ssd_latency
from recasim.trace import READ, WRITE

KIB = 1024
P = DeviceParams()


def after(last_end, fn, op, offset, length):
    return fn(P, DeviceState(last_end), op, offset, length)


def test_hdd_random_read_4k():
    assert after(None, hdd_latency, READ, 0, 4096) == pytest.approx(12500 + 4096 / 120e6 * 1e6)


def test_hdd_sequential_write_4k():
    assert after(0, hdd_latency, WRITE, 0, 4096) == pytest.approx(4096 / 120e6 * 1e6)
    assert after(0, hdd_latency, WRITE, 0, 4096) == pytest.approx(34.13, abs=0.01)


def test_hdd_strided_read_is_three_times_sequential():
    seq = after(0, hdd_latency, READ, 0, 4096)
    assert after(0, hdd_latency, READ, 8 * KIB, 4096) == pytest.approx(3 * seq)


def test_ssd_examples():
    d = DeviceModel()
    assert d.ssd(WRITE, 10**9, 4096) == pytest.approx(1e6 / 30000)
    assert d.counters.ssd_host_writes_bytes == 4096
    assert after(None, ssd_latency, READ, 0, 4096) == pytest.approx(50.0)
    assert after(0, ssd_latency, READ, 0, 128 * KIB) == pytest.approx(131072 / 480e6 * 1e6)
    assert after(0, ssd_latency, READ, 0, 128 * KIB) == pytest.approx(273, abs=1)


@pytest.mark.parametrize("size", [4 * KIB, 8 * KIB, 64 * KIB, 128 * KIB])
def test_hdd_read_ordering(size):
    seq = after(0, hdd_latency, READ, 0, size)
    strided = after(0, hdd_latency, READ, 8 * KIB, size)
    rnd = after(None, hdd_latency, READ, 0, size)
    assert seq < strided < rnd


def test_hdd_random_write_cheaper_than_read():
    assert after(None, hdd_latency, WRITE, 0, 4096) < after(None, hdd_latency, READ, 0, 4096)


def test_interleaving_makes_streams_random():
    d = DeviceModel()
    d.hdd(READ, 0, 4096)
    assert d.hdd(READ, 4096, 4096) < 100
    d.hdd(READ, 10**9, 4096)
    assert d.hdd(READ, 8192, 4096) > 12000


def test_bad_length_rejected():
    with pytest.raises(ValueError):
        DeviceModel().hdd(READ, 0, 100)


def test_background_ops_do_not_move_head():
    d = DeviceModel()
    d.hdd(READ, 0, 4096)
    d.bg_hdd(READ, 131072)
    assert d.hdd(READ, 4096, 4096) < 100
    assert d.counters.bg_us > 0


def test_params_validation_and_config():
    with pytest.raises(ValueError):
        DeviceParams(hdd_seq_bw=0)
    p = load_device_params("[devices]\nhdd_rnd_read_iops = 100\n")
    assert p.hdd_rnd_read_iops == 100 and p.hdd_seq_bw == 120e6
    with pytest.raises(ValueError):
        load_device_params("[devices]\nwarp = 9\n")


ops = st.lists(st.tuples(st.sampled_from(["hdd", "ssd"]), st.sampled_from([READ, WRITE]),
                         st.integers(0, 64), st.integers(1, 64)), max_size=50)


@given(ops)
def test_determinism_and_write_accounting(seq):
    def replay():
        d = DeviceModel()
        total = 0.0
        for dev, op, off, n in seq:
            total += getattr(d, dev)(op, off * 4096, n * 512)
        return d, total

    d1, t1 = replay()
    d2, t2 = replay()
    assert t1 == t2
    ssd_written = sum(n * 512 for dev, op, _, n in seq if dev == "ssd" and op == WRITE)
    assert d1.counters.ssd_host_writes_bytes == ssd_written
    c = d1.counters
    assert c.hdd_reads + c.hdd_writes + c.ssd_reads + c.ssd_writes == c.charged_ops == len(seq)
