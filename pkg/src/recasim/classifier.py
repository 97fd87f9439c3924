"""Online request classification against a bounded history queue.

A request is classified when it is popped from the history queue, against
the requests still queued (the ones that arrived after it). Types are also
available as compact integer codes::

    code = (access * 2 + rw) + 8 * is_over

with access SEQUENTIAL=0, STRIDED=1, RANDOM=2 and rw READ=0, WRITE=1, so the
low three bits index the feature order ``seqR seqW strR strW rndR rndW``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from recasim.trace import READ, WRITE, IoRequest, Trace

QUEUE_LENGTH = 64
SEQ_THRESHOLD = 512 * 1024
STRIDE_THRESHOLD = 16 * 1024

FEATURES = ("seqR", "seqW", "strR", "strW", "rndR", "rndW")
FEATURE_KEYS = FEATURES + ("over",)
OVER_BIT = 8


class Access(IntEnum):
    SEQUENTIAL = 0
    STRIDED = 1
    RANDOM = 2


@dataclass(frozen=True)
class RequestType:
    access: Access
    is_over: bool
    rw: int  # READ or WRITE

    @property
    def code(self) -> int:
        return int(self.access) * 2 + self.rw + (OVER_BIT if self.is_over else 0)

    @classmethod
    def from_code(cls, code: int) -> "RequestType":
        k = code & 7
        return cls(Access(k // 2), bool(code & OVER_BIT), k % 2)


def characterize(old_io: IoRequest, queue, seq_threshold: int = SEQ_THRESHOLD,
                 stride_threshold: int = STRIDE_THRESHOLD) -> RequestType:
    """Classify ``old_io`` against the queued requests.

    Adjacency and strides are matched in both directions; sequential wins
    over strided. ``is_over`` holds when old_io's begin lies in
    ``[t.begin, t.end)`` or its end lies strictly inside ``(t.begin, t.end)``
    for some queued ``t``.
    """
    b, e = old_io.offset, old_io.offset + old_io.len
    access = Access.SEQUENTIAL if old_io.len > seq_threshold else None
    over = False
    for t in queue:
        tb, te = t.offset, t.offset + t.len
        if access is not Access.SEQUENTIAL:
            if e == tb or te == b:
                access = Access.SEQUENTIAL
            elif (b > te and b - te < stride_threshold) or (e < tb and tb - e < stride_threshold):
                access = Access.STRIDED
        if not over and ((tb <= b < te) or (tb < e < te)):
            over = True
        if over and access is Access.SEQUENTIAL:
            break
    if access is None:
        access = Access.RANDOM
    return RequestType(access, over, WRITE if old_io.op == WRITE else READ)


class HistoryQueue:
    """Bounded FIFO of recent requests (Access_History_Manager)."""

    def __init__(self, capacity: int = QUEUE_LENGTH, seq_threshold: int = SEQ_THRESHOLD,
                 stride_threshold: int = STRIDE_THRESHOLD):
        self.capacity = capacity
        self.seq_threshold = seq_threshold
        self.stride_threshold = stride_threshold
        self.entries: deque[IoRequest] = deque()

    def __len__(self) -> int:
        return len(self.entries)

    def observe(self, new_io: IoRequest):
        """Push ``new_io``; once over capacity, pop and classify the oldest.

        Returns ``(old_io, RequestType)`` or ``None``.
        """
        if self.entries and new_io.seq <= self.entries[-1].seq:
            raise ValueError("requests must arrive in seq order")
        self.entries.append(new_io)
        if len(self.entries) <= self.capacity:
            return None
        old = self.entries.popleft()
        return old, characterize(old, self.entries, self.seq_threshold, self.stride_threshold)


def classify_trace(trace: Trace, window: int = QUEUE_LENGTH, seq_threshold: int = SEQ_THRESHOLD,
                   stride_threshold: int = STRIDE_THRESHOLD) -> np.ndarray:
    """Type codes for a whole trace, vectorized over the look-ahead distance.

    Entry i is the code request i receives when it is popped, i.e. classified
    against requests i+1..i+window. The last ``window`` requests are never
    popped during a replay and get -1.
    """
    n = len(trace)
    codes = np.full(n, -1, dtype=np.int8)
    m = n - window
    if m <= 0:
        return codes
    b = trace.offset
    e = trace.offset + trace.length
    ob, oe = b[:m], e[:m]
    seq = trace.length[:m] > seq_threshold
    strided = np.zeros(m, dtype=bool)
    over = np.zeros(m, dtype=bool)
    for k in range(1, window + 1):
        tb = b[k:k + m]
        te = e[k:k + m]
        seq |= (oe == tb) | (te == ob)
        strided |= ((ob > te) & (ob - te < stride_threshold)) | ((oe < tb) & (tb - oe < stride_threshold))
        over |= ((tb <= ob) & (ob < te)) | ((tb < oe) & (oe < te))
    access = np.where(seq, 0, np.where(strided, 1, 2))
    codes[:m] = access * 2 + trace.op[:m] + OVER_BIT * over
    return codes


def classify_by_pid(trace: Trace, window: int = QUEUE_LENGTH, **kw) -> np.ndarray:
    """Like :func:`classify_trace` but with one history queue per pid."""
    codes = np.full(len(trace), -1, dtype=np.int8)
    for pid in np.unique(trace.pid):
        idx = np.flatnonzero(trace.pid == pid)
        codes[idx] = classify_trace(trace.select(idx), window, **kw)
    return codes


@dataclass(frozen=True)
class FeatureVector:
    """Fractions of the six access x rw classes plus the overlapped fraction."""

    f: tuple[float, float, float, float, float, float]
    f_over: float
    window_len: int = 0

    def as_array(self) -> np.ndarray:
        return np.array(self.f + (self.f_over,), dtype=float)

    def __getitem__(self, key: str) -> float:
        if key == "over":
            return self.f_over
        return self.f[FEATURES.index(key)]

    @classmethod
    def from_mapping(cls, values: dict, window_len: int = 0) -> "FeatureVector":
        return cls(tuple(float(values.get(k, 0.0)) for k in FEATURES), float(values.get("over", 0.0)),
                   window_len)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_KEYS, self.f + (self.f_over,)))


def features_from_counts(counts, n_over: int) -> FeatureVector:
    n = int(sum(counts))
    if n == 0:
        raise ValueError("empty window")
    return FeatureVector(tuple(c / n for c in counts), n_over / n, n)


def window_features(types) -> FeatureVector:
    """Feature vector of a window of RequestTypes (or integer codes)."""
    counts = [0] * 6
    n_over = 0
    for t in types:
        code = t.code if isinstance(t, RequestType) else int(t)
        counts[code & 7] += 1
        n_over += bool(code & OVER_BIT)
    if sum(counts) == 0:
        raise ValueError("window_features needs a non-empty sequence")
    return features_from_counts(counts, n_over)


def code_features(codes: np.ndarray) -> FeatureVector:
    """Feature vector over an array of codes, ignoring unclassified (-1) entries."""
    codes = np.asarray(codes)
    codes = codes[codes >= 0]
    if codes.size == 0:
        raise ValueError("no classified requests")
    counts = np.bincount(codes & 7, minlength=6)[:6]
    return features_from_counts(counts.tolist(), int(np.count_nonzero(codes & OVER_BIT)))
