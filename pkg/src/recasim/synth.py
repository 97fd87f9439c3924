"""Deterministic synthetic traces for the workload categories and for the
sequential/random interleaving workloads W1..W8.

Category traces are built so that the classifier recovers the target mix.
Each emitted request draws its (access, rw) class from the mix; the class is
then made true by what follows the request within the 64-request window:

* sequential: a successor starting exactly at the request's end is queued;
* strided: a successor 1-3 pages past the end is queued;
* random: nothing is placed near it.

Queued successors are emitted within a few positions, so a handful of streams
interleave. Requests that do not fill a queued successor are fresh: random
requests draw a Zipf-popular page from the random region, stream starts draw
a Zipf-popular file and a random offset inside it. Fresh addresses are
aligned to the request size and rejected if they fall within four pages of
any request still in the window,
so accidental adjacency does not leak into the mix. Overlap comes from
mirrors: after a request, with probability ``over`` an exact copy follows
(repeated geometrically), which marks the original overlapped and keeps the
access class of the copy.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from recasim.classifier import FEATURES, QUEUE_LENGTH, FeatureVector
from recasim.profiles import CategoryRecord
from recasim.trace import PAGE_SIZE, READ, WRITE, Trace

GUARD_PAGES = 4
MAX_REJECTS = 10_000
_CHUNK = 1 << 16


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class CategoryProfile:
    name: str
    target_mix: FeatureVector
    working_set_pages: int = 524288
    file_count: int = 1024
    mean_file_pages: int = 64
    zipf_s: float = 0.9
    request_pages: int = 1

    def __post_init__(self):
        total = sum(self.target_mix.f)
        if abs(total - 1.0) > 1e-9:
            raise GenerationError(f"{self.name}: access x rw fractions sum to {total}, not 1")
        if not 0.0 <= self.target_mix.f_over <= 1.0 or min(self.target_mix.f) < 0:
            raise GenerationError(f"{self.name}: fractions out of range")

    @classmethod
    def from_record(cls, rec: CategoryRecord) -> "CategoryProfile":
        g = rec.gen
        f = np.array(rec.signature.f)
        f = f / f.sum()
        mix = FeatureVector(tuple(float(x) for x in f), rec.signature.f_over)
        return cls(rec.name, mix, g.working_set_pages, g.file_count, g.mean_file_pages, g.zipf_s,
                   g.request_pages)


class _Zipf:
    """Buffered Zipf(s) ranks over n items, mapped through a fixed permutation."""

    def __init__(self, n: int, s: float, rng: np.random.Generator):
        w = np.arange(1, n + 1, dtype=float) ** -s
        self.cdf = np.cumsum(w) / w.sum()
        self.perm = rng.permutation(n)
        self.rng = rng
        self.buf: list[int] = []

    def draw(self) -> int:
        if not self.buf:
            idx = np.searchsorted(self.cdf, self.rng.random(_CHUNK), side="right")
            self.buf = self.perm[np.minimum(idx, len(self.cdf) - 1)].tolist()
            self.buf.reverse()
        return self.buf.pop()


class _Stream:
    """Buffered draws of one numpy distribution."""

    def __init__(self, fn):
        self.fn = fn
        self.buf: list = []

    def draw(self):
        if not self.buf:
            self.buf = self.fn(_CHUNK).tolist()
            self.buf.reverse()
        return self.buf.pop()


def _check_feasible(p: CategoryProfile) -> None:
    f = p.target_mix
    if f.f_over >= 1.0:
        raise GenerationError("overlapped fraction 1 cannot be produced: every request would need a later copy")
    files = p.file_count * p.mean_file_pages
    random_pages = p.working_set_pages - files
    # the window plus its guard band must leave room for fresh addresses
    need = (QUEUE_LENGTH + 16) * (p.request_pages + 2 * GUARD_PAGES + 3) * 2
    if p.working_set_pages < need:
        raise GenerationError(f"working set of {p.working_set_pages} pages is too small (need >= {need})")
    rnd = f.f[4] + f.f[5]
    if rnd > 0 and random_pages < need:
        raise GenerationError("files region leaves no room for random requests")
    if (1 - rnd) > 0 and (p.file_count < 1 or p.mean_file_pages < p.request_pages):
        raise GenerationError("stream requests need at least one file of one request")


def generate_category_trace(profile: CategoryProfile | CategoryRecord, n_requests: int, seed: int,
                            pid: int = 1, max_delay: int = 4) -> Trace:
    """Trace of ``n_requests`` whose classified mix matches ``profile.target_mix``."""
    if isinstance(profile, CategoryRecord):
        profile = CategoryProfile.from_record(profile)
    if n_requests < 1000:
        raise GenerationError("n_requests must be at least 1000")
    _check_feasible(profile)
    rng = np.random.default_rng(seed)
    mix = np.array(profile.target_mix.f)
    over = profile.target_mix.f_over
    npg = profile.request_pages
    ws = profile.working_set_pages
    files_end = profile.file_count * profile.mean_file_pages
    rnd_slots = (ws - files_end) // npg

    cls_draw = _Stream(lambda k: rng.choice(6, size=k, p=mix))
    unif = _Stream(lambda k: rng.random(k))
    delay = _Stream(lambda k: rng.integers(1, max_delay + 1, size=k))
    # strided gaps stay below 16 KiB and keep request alignment when possible
    gap_units = max(1, 3 // npg)
    gap = _Stream(lambda k: rng.integers(1, gap_units + 1, size=k) * min(npg, 3))
    in_file = _Stream(lambda k: rng.integers(0, max(1, profile.mean_file_pages // npg), size=k))
    # read-hot and write-hot sets differ
    rnd_zipf = [_Zipf(max(rnd_slots, 1), profile.zipf_s, rng) for _ in (READ, WRITE)]
    file_zipf = [_Zipf(max(profile.file_count, 1), profile.zipf_s, rng) for _ in (READ, WRITE)]
    # P(read | access) for mirrors
    p_read = [mix[2 * a] / (mix[2 * a] + mix[2 * a + 1]) if mix[2 * a] + mix[2 * a + 1] > 0 else 0.5
              for a in range(3)]

    near: dict[int, int] = {}
    window: deque = deque()
    pending: list = []  # (deadline, order, page)
    order = 0

    def mark(page: int, d: int) -> None:
        for q in range(page - GUARD_PAGES, page + npg + GUARD_PAGES):
            c = near.get(q, 0) + d
            if c:
                near[q] = c
            else:
                del near[q]

    def clear(page: int) -> bool:
        for q in range(page, page + npg):
            if q in near:
                return False
        return True

    def fresh(cls: int, rw: int) -> int:
        for _ in range(MAX_REJECTS):
            if cls >= 4:
                page = files_end + rnd_zipf[rw].draw() * npg
            else:
                page = file_zipf[rw].draw() * profile.mean_file_pages + in_file.draw() * npg
                if page + npg > ws:
                    continue
            if clear(page):
                return page
        raise GenerationError("could not place a fresh request; working set too crowded")

    pages = np.empty(n_requests, dtype=np.int64)
    ops = np.empty(n_requests, dtype=np.int8)
    t = 0

    def emit(page: int, rw: int) -> None:
        nonlocal t
        pages[t] = page
        ops[t] = rw
        t += 1
        mark(page, 1)
        window.append(page)
        if len(window) > QUEUE_LENGTH:
            mark(window.popleft(), -1)

    while t < n_requests:
        cls = cls_draw.draw()
        rw = cls & 1
        if pending and pending[0][0] <= t:
            _, _, page = heapq.heappop(pending)
            mark(page, -1)
        else:
            page = fresh(cls, rw)
        emit(page, rw)
        acc = cls >> 1
        while t < n_requests and unif.draw() < over:
            emit(page, READ if unif.draw() < p_read[acc] else WRITE)
        if acc < 2:
            nxt = page + npg + (gap.draw() if acc == 1 else 0)
            if nxt + npg <= ws:
                order += 1
                heapq.heappush(pending, (t + delay.draw() - 1, order, nxt))
                mark(nxt, 1)

    n = n_requests
    return Trace(np.arange(1, n + 1, dtype=np.int64), np.full(n, pid, dtype=np.int32), ops,
                 pages * PAGE_SIZE, np.full(n, npg * PAGE_SIZE, dtype=np.int64), page_size=PAGE_SIZE)


# -- interleaving workloads ---------------------------------------------------

FULL = 20_000
HALF = 10_000
INTERLEAVE_WS_PAGES = 524288

# stage = tuple of (kind, count) streams played round-robin
WORKLOADS: dict[str, list[tuple[tuple[str, int], ...]]] = {
    "W1": [(("seq", FULL),), (("rand", FULL),)],
    "W2": [(("seq", FULL), ("rand", FULL))],
    "W3": [(("seq", HALF), ("rand", HALF)), (("seq", HALF), ("rand", HALF))],
    "W4": [(("seq", HALF),), (("seq", HALF), ("rand", FULL))],
    "W5": [(("seq", FULL), ("rand", HALF))],
    "W6": [(("seq", HALF), ("rand", FULL))],
    "W7": [(("seq", FULL),), (("rand", HALF),)],
    "W8": [(("seq", HALF),), (("rand", FULL),)],
}


def generate_interleaving_workload(name: str, seed: int, working_set_pages: int = INTERLEAVE_WS_PAGES) -> Trace:
    """W1..W8: 4 KiB requests, one contiguous sequential stream and uniform random requests."""
    if name not in WORKLOADS:
        raise GenerationError(f"unknown workload {name!r}; expected one of {', '.join(WORKLOADS)}")
    rng = np.random.default_rng(seed)
    seq_next = 0
    pages: list[int] = []
    for stage in WORKLOADS[name]:
        cursors = []
        for kind, count in stage:
            if kind == "seq":
                cursors.append(iter(range(seq_next, seq_next + count)))
                seq_next += count
            else:
                cursors.append(iter(rng.integers(0, working_set_pages, size=count).tolist()))
        live = list(cursors)
        while live:
            for c in list(live):
                p = next(c, None)
                if p is None:
                    live.remove(c)
                else:
                    pages.append(p)
    n = len(pages)
    return Trace(np.arange(1, n + 1), np.ones(n, dtype=np.int32), np.zeros(n, dtype=np.int8),
                 np.array(pages, dtype=np.int64) * PAGE_SIZE, np.full(n, PAGE_SIZE, dtype=np.int64))


def interleave_processes(traces: list[Trace], seed: int, spacing_bytes: int | None = None) -> Trace:
    """Randomly interleave traces as separate processes (pids 1..k).

    Each trace keeps its internal order and is shifted into its own address
    range, ``spacing_bytes`` apart (default: the largest end offset, rounded
    up to 1 GiB).
    """
    if not traces:
        raise GenerationError("nothing to interleave")
    rng = np.random.default_rng(seed)
    if spacing_bytes is None:
        top = max(int((t.offset + t.length).max()) for t in traces)
        spacing_bytes = -(-top // (1 << 30)) * (1 << 30)
    owner = np.concatenate([np.full(len(t), i) for i, t in enumerate(traces)])
    rng.shuffle(owner)
    n = len(owner)
    pid = np.empty(n, dtype=np.int64)
    op = np.empty(n, dtype=np.int8)
    off = np.empty(n, dtype=np.int64)
    ln = np.empty(n, dtype=np.int64)
    for i, t in enumerate(traces):
        pos = np.flatnonzero(owner == i)
        pid[pos] = i + 1
        op[pos] = t.op
        off[pos] = t.offset + i * spacing_bytes
        ln[pos] = t.length
    return Trace(np.arange(1, n + 1), pid, op, off, ln)


def measured_mix(trace: Trace) -> FeatureVector:
    from recasim.classifier import classify_trace, code_features

    return code_features(classify_trace(trace))


__all__ = ["CategoryProfile", "GenerationError", "generate_category_trace", "generate_interleaving_workload",
           "measured_mix", "interleave_processes", "WORKLOADS", "FEATURES"]
