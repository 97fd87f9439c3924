"""Per-line priority table with access-type counters.

Each entry keeps six counters (one per access x rw class) and an overlapped
count, so its priority can be recomputed under any category's weights. Line
size changes split or merge entries by dividing or summing counters; split
factors are powers of two, so float division stays exact.
"""
from __future__ import annotations

import heapq

from recasim.classifier import OVER_BIT
from recasim.profiles import CategoryRecord


def priority_calc(type_code: int, weights: CategoryRecord) -> float:
    return weights.weight_table()[type_code]


class PriorityTable:
    """page_addr -> (counters, priority), capped at ``max_entries``."""

    def __init__(self, weights: CategoryRecord, line_size: int, max_entries: int):
        if max_entries < 1:
            raise ValueError("max_entries must be positive")
        self.max_entries = max_entries
        self.line_size = line_size
        self.prio: dict[int, float] = {}
        self.counts: dict[int, list[float]] = {}  # 6 class counters + over count
        self._heap: list[tuple[float, int]] = []
        self.dropped = 0
        self.set_weights(weights)

    def set_weights(self, weights: CategoryRecord) -> None:
        self.weights = weights
        self._wt = weights.weight_table()
        self._fw = weights.feature_weights()
        self._over = weights.over_priority

    def __len__(self) -> int:
        return len(self.prio)

    def __contains__(self, addr: int) -> bool:
        return addr in self.prio

    def get(self, addr: int) -> float:
        return self.prio.get(addr, 0.0)

    def accesses(self, addr: int) -> float:
        c = self.counts.get(addr)
        return sum(c[:6]) if c else 0.0

    def total(self) -> float:
        return sum(self.prio.values())

    def recompute(self, addr: int) -> float:
        c = self.counts[addr]
        return sum(n * w for n, w in zip(c, self._fw)) + c[6] * self._over

    def accumulate(self, addr: int, type_code: int) -> float:
        """Add Priority_Calc(type) to ``addr``; returns the new priority."""
        c = self.counts.get(addr)
        if c is None:
            if len(self.prio) >= self.max_entries:
                self._drop_min()
            c = self.counts[addr] = [0.0] * 7
            p = 0.0
        else:
            p = self.prio[addr]
        c[type_code & 7] += 1
        if type_code & OVER_BIT:
            c[6] += 1
        p += self._wt[type_code]
        self.prio[addr] = p
        heapq.heappush(self._heap, (p, addr))
        if len(self._heap) > 4 * self.max_entries + 64:
            self._rebuild_heap()
        return p

    def _rebuild_heap(self) -> None:
        self._heap = [(p, a) for a, p in self.prio.items()]
        heapq.heapify(self._heap)

    def _drop_min(self) -> None:
        heap = self._heap
        while heap:
            p, a = heapq.heappop(heap)
            if self.prio.get(a) == p:
                del self.prio[a]
                del self.counts[a]
                self.dropped += 1
                return
        self._rebuild_heap()
        self._drop_min()

    def switch_category(self, weights: CategoryRecord) -> None:
        """Recompute every priority from its counters under new weights."""
        self.set_weights(weights)
        for a in self.prio:
            self.prio[a] = self.recompute(a)
        self._rebuild_heap()

    def rescale(self, new_size: int, max_entries: int | None = None) -> None:
        """Re-key entries for a new line size, preserving total priority.

        Mass is preserved exactly unless the resized table overflows
        ``max_entries``, in which case the lowest entries are dropped.
        """
        if max_entries is not None:
            self.max_entries = max_entries
        old = self.line_size
        if new_size == old:
            self._trim()
            return
        prio, counts = {}, {}
        if new_size < old:
            k = old // new_size
            for a, p in self.prio.items():
                c = [n / k for n in self.counts[a]]
                child_p = p / k
                for i in range(k):
                    ca = a + i * new_size
                    prio[ca] = child_p
                    counts[ca] = list(c)
        else:
            for a in sorted(self.prio):
                pa = a - a % new_size
                if pa in prio:
                    prio[pa] += self.prio[a]
                    counts[pa] = [x + y for x, y in zip(counts[pa], self.counts[a])]
                else:
                    prio[pa] = self.prio[a]
                    counts[pa] = list(self.counts[a])
        self.prio, self.counts, self.line_size = prio, counts, new_size
        self._trim()

    def _trim(self) -> None:
        excess = len(self.prio) - self.max_entries
        if excess > 0:
            for p, a in heapq.nsmallest(excess, ((p, a) for a, p in self.prio.items())):
                del self.prio[a]
                del self.counts[a]
            self.dropped += excess
        self._rebuild_heap()

    def entries(self):
        """(addr, priority, counters) in address order."""
        for a in sorted(self.prio):
            yield a, self.prio[a], tuple(self.counts[a])


def rescale_for_line_size(table: PriorityTable, old_size: int, new_size: int) -> PriorityTable:
    if table.line_size != old_size:
        raise ValueError(f"table is keyed at {table.line_size}, not {old_size}")
    table.rescale(new_size)
    return table
