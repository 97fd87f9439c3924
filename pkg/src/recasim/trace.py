"""Canonical block-trace representation and the CSV trace format.

A trace is stored columnar (numpy arrays) because replays touch millions of
records; :class:`IoRequest` is the per-record view.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np

SECTOR = 512
PAGE_SIZE = 4096
HEADER = "seq,ts_us,pid,op,offset,len,is_meta"

READ = 0
WRITE = 1


class TraceError(ValueError):
    """Malformed or invalid trace input."""


@dataclass(frozen=True)
class IoRequest:
    seq: int
    pid: int
    op: int  # READ or WRITE
    offset: int
    len: int
    ts_us: int = 0
    is_meta: bool = False

    @property
    def end(self) -> int:
        return self.offset + self.len

    @property
    def is_write(self) -> bool:
        return self.op == WRITE

    def validate(self) -> None:
        if self.len <= 0:
            raise TraceError(f"request {self.seq}: len must be positive")
        if self.offset < 0 or self.offset % SECTOR:
            raise TraceError(f"request {self.seq}: offset {self.offset} not a multiple of {SECTOR}")
        if self.len % SECTOR:
            raise TraceError(f"request {self.seq}: len {self.len} not a multiple of {SECTOR}")
        if self.pid < 0:
            raise TraceError(f"request {self.seq}: negative pid")


class Trace:
    """Ordered, validated request sequence backed by numpy columns."""

    def __init__(self, seq, pid, op, offset, length, ts_us=None, is_meta=None,
                 page_size: int = PAGE_SIZE, validate: bool = True):
        self.seq = np.asarray(seq, dtype=np.int64)
        n = len(self.seq)
        self.pid = np.asarray(pid, dtype=np.int64)
        self.op = np.asarray(op, dtype=np.int8)
        self.offset = np.asarray(offset, dtype=np.int64)
        self.length = np.asarray(length, dtype=np.int64)
        self.ts_us = np.zeros(n, dtype=np.int64) if ts_us is None else np.asarray(ts_us, dtype=np.int64)
        self.is_meta = np.zeros(n, dtype=bool) if is_meta is None else np.asarray(is_meta, dtype=bool)
        self.page_size = page_size
        self._unique_pages = None
        if validate:
            self._validate()

    def _validate(self) -> None:
        cols = (self.pid, self.op, self.offset, self.length, self.ts_us, self.is_meta)
        if any(len(c) != len(self.seq) for c in cols):
            raise TraceError("column lengths differ")
        if len(self.seq) == 0:
            return
        if np.any(np.diff(self.seq) <= 0):
            raise TraceError("seq must be strictly increasing")
        for name, col in (("offset", self.offset), ("len", self.length)):
            bad = np.flatnonzero(col % SECTOR)
            if bad.size:
                i = int(bad[0])
                raise TraceError(f"request {int(self.seq[i])}: {name} {int(col[i])} not a multiple of {SECTOR}")
        if np.any(self.length <= 0):
            raise TraceError("len must be positive")
        if np.any(self.offset < 0) or np.any(self.pid < 0):
            raise TraceError("offset and pid must be non-negative")
        if np.any((self.op != READ) & (self.op != WRITE)):
            raise TraceError("op must be READ or WRITE")

    @classmethod
    def from_requests(cls, requests: Iterable[IoRequest], page_size: int = PAGE_SIZE) -> "Trace":
        reqs = list(requests)
        return cls([r.seq for r in reqs], [r.pid for r in reqs], [r.op for r in reqs],
                   [r.offset for r in reqs], [r.len for r in reqs],
                   [r.ts_us for r in reqs], [r.is_meta for r in reqs], page_size=page_size)

    def __len__(self) -> int:
        return len(self.seq)

    def __getitem__(self, i: int) -> IoRequest:
        return IoRequest(int(self.seq[i]), int(self.pid[i]), int(self.op[i]), int(self.offset[i]),
                         int(self.length[i]), int(self.ts_us[i]), bool(self.is_meta[i]))

    def __iter__(self) -> Iterator[IoRequest]:
        cols = zip(self.seq.tolist(), self.pid.tolist(), self.op.tolist(), self.offset.tolist(),
                   self.length.tolist(), self.ts_us.tolist(), self.is_meta.tolist())
        for s, p, o, off, ln, ts, meta in cols:
            yield IoRequest(s, p, o, off, ln, ts, meta)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (len(self) == len(other) and self.page_size == other.page_size
                and all(np.array_equal(a, b) for a, b in zip(self._columns(), other._columns())))

    def _columns(self):
        return (self.seq, self.ts_us, self.pid, self.op, self.offset, self.length, self.is_meta)

    def select(self, mask_or_index) -> "Trace":
        return Trace(self.seq[mask_or_index], self.pid[mask_or_index], self.op[mask_or_index],
                     self.offset[mask_or_index], self.length[mask_or_index],
                     self.ts_us[mask_or_index], self.is_meta[mask_or_index],
                     page_size=self.page_size, validate=False)

    @property
    def unique_pages(self) -> int:
        if self._unique_pages is None:
            self._unique_pages = unique_page_count(self)
        return self._unique_pages

    @property
    def pids(self) -> list[int]:
        return sorted(set(self.pid.tolist()))


def concat(traces: list[Trace]) -> Trace:
    """Concatenate traces, renumbering seq from 1."""
    n = sum(len(t) for t in traces)
    return Trace(np.arange(1, n + 1), np.concatenate([t.pid for t in traces]),
                 np.concatenate([t.op for t in traces]), np.concatenate([t.offset for t in traces]),
                 np.concatenate([t.length for t in traces]), np.concatenate([t.ts_us for t in traces]),
                 np.concatenate([t.is_meta for t in traces]), page_size=traces[0].page_size, validate=False)


def unique_page_count(trace: Trace, page_size: int | None = None) -> int:
    """Number of distinct page-aligned addresses covered by any request."""
    ps = page_size or trace.page_size
    if len(trace) == 0:
        return 0
    first = trace.offset // ps
    last = (trace.offset + trace.length - 1) // ps
    span = last - first + 1
    if np.all(span == 1):
        return int(np.unique(first).size)
    # expand multi-page requests
    reps = np.repeat(first, span)
    steps = np.arange(int(span.sum())) - np.repeat(np.cumsum(span) - span, span)
    return int(np.unique(reps + steps).size)


def _parse_int(field: str, name: str, lineno: int) -> int:
    try:
        return int(field)
    except ValueError:
        raise TraceError(f"line {lineno}: bad {name} {field!r}") from None


def parse_trace(stream: TextIO | str, page_size: int = PAGE_SIZE) -> Trace:
    """Parse the canonical CSV format.

    Accepts either a text stream or a string. The header is optional; when
    present it fixes the column order, otherwise the canonical order is
    assumed. A missing ``seq`` column is filled from line order.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    columns = HEADER.split(",")
    seqs, ts, pids, ops, offs, lens, metas = [], [], [], [], [], [], []
    auto_seq = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if fields[0] == "seq" or "op" in fields and "offset" in fields:
            columns = fields
            unknown = set(columns) - set(HEADER.split(","))
            if unknown or not {"op", "offset", "len"} <= set(columns):
                raise TraceError(f"line {lineno}: bad header {line!r}")
            continue
        if len(fields) != len(columns):
            raise TraceError(f"line {lineno}: expected {len(columns)} fields, got {len(fields)}")
        rec = dict(zip(columns, fields))
        auto_seq += 1
        op = rec["op"].upper()
        if op not in ("R", "W"):
            raise TraceError(f"line {lineno}: op must be R or W, got {rec['op']!r}")
        meta = rec.get("is_meta", "0")
        if meta not in ("0", "1"):
            raise TraceError(f"line {lineno}: is_meta must be 0 or 1")
        req = IoRequest(
            seq=_parse_int(rec["seq"], "seq", lineno) if "seq" in rec else auto_seq,
            ts_us=_parse_int(rec.get("ts_us", "0"), "ts_us", lineno),
            pid=_parse_int(rec.get("pid", "0"), "pid", lineno),
            op=WRITE if op == "W" else READ,
            offset=_parse_int(rec["offset"], "offset", lineno),
            len=_parse_int(rec["len"], "len", lineno),
            is_meta=meta == "1",
        )
        try:
            req.validate()
        except TraceError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
        if seqs and req.seq <= seqs[-1]:
            raise TraceError(f"line {lineno}: seq {req.seq} not increasing")
        seqs.append(req.seq)
        ts.append(req.ts_us)
        pids.append(req.pid)
        ops.append(req.op)
        offs.append(req.offset)
        lens.append(req.len)
        metas.append(req.is_meta)
    return Trace(seqs, pids, ops, offs, lens, ts, metas, page_size=page_size, validate=False)


def write_trace(trace: Trace, stream: TextIO) -> None:
    stream.write(HEADER + "\n")
    ops = np.where(trace.op == WRITE, "W", "R")
    rows = zip(trace.seq.tolist(), trace.ts_us.tolist(), trace.pid.tolist(), ops.tolist(),
               trace.offset.tolist(), trace.length.tolist(), trace.is_meta.astype(int).tolist())
    stream.writelines(f"{s},{t},{p},{o},{off},{ln},{m}\n" for s, t, p, o, off, ln, m in rows)


def load_trace(path) -> Trace:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh)


def save_trace(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_trace(trace, fh)
