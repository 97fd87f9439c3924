import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from recasim.trace import Trace

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_trace(rows, pid=1):
    """Trace from (op, offset, length) triples; op is 'R' or 'W'."""
    n = len(rows)
    return Trace(np.arange(1, n + 1), np.full(n, pid),
                 [0 if r[0] == "R" else 1 for r in rows], [r[1] for r in rows], [r[2] for r in rows])


def random_trace(n, seed, max_page=4096, lengths=(4096, 8192, 16384), write_frac=0.3):
    rng = np.random.default_rng(seed)
    return Trace(np.arange(1, n + 1), np.ones(n, dtype=np.int64), (rng.random(n) < write_frac).astype(np.int8),
                 rng.integers(0, max_page, n) * 4096, rng.choice(lengths, n))


@pytest.fixture
def rows_trace():
    return make_trace


# acceptance criteria append "PASS/FAIL ..." lines here; echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
