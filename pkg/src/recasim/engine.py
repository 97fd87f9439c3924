"""The reconfigurable cache engine.

Requests are split at line boundaries. Each block is looked up in the cache
table; on a miss the cache manager decides, within the block's set, whether
the block displaces the set's lowest-scoring line. Every request also feeds
the history queue; popped requests add to the priority table, and every
``window`` classifications the workload is re-matched against the
characteristics table, reconfiguring line size, write policy and eviction
policy when the category changes.
"""
from __future__ import annotations

import heapq
from collections import OrderedDict, deque
from dataclasses import dataclass, fields

from recasim.classifier import OVER_BIT, HistoryQueue, features_from_counts
from recasim.device import DeviceModel
from recasim.priority import PriorityTable
from recasim.profiles import CharacteristicsTable, Eviction, TableHandle, WritePolicy, match_category
from recasim.trace import PAGE_SIZE, READ, WRITE, IoRequest

HIT = "HIT"
HIT_PARTIAL = "HIT_PARTIAL"
MISS_BYPASS = "MISS_BYPASS"
MISS_PROMOTE = "MISS_PROMOTE"

STREAM_BYPASS_BYTES = 512 * 1024
_GOLDEN = 0x9E3779B97F4A7C15
_M64 = (1 << 64) - 1


@dataclass(frozen=True)
class BlockRoute:
    disk_addr: int
    route: str


@dataclass
class EngineStats:
    requests: int = 0
    blocks: int = 0
    hits: int = 0
    hits_partial: int = 0
    misses: int = 0
    promotions: int = 0
    bypasses: int = 0
    evictions: int = 0
    reconfig_evictions: int = 0
    structural_evictions: int = 0
    promo_overflow: int = 0
    flushes: int = 0
    invalidations: int = 0
    reconfigurations: int = 0
    backfills: int = 0

    def copy(self) -> "EngineStats":
        return EngineStats(**{f.name: getattr(self, f.name) for f in fields(self)})

    def add(self, other: "EngineStats") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))


class Slot:
    __slots__ = ("slot_id", "addr", "dirty", "prio", "freq", "stamp", "bitmap", "set_id")

    def __init__(self, slot_id, addr, set_id, bitmap, stamp, prio=0.0, freq=0.0, dirty=False):
        self.slot_id = slot_id
        self.addr = addr
        self.set_id = set_id
        self.bitmap = bitmap
        self.stamp = stamp
        self.prio = prio
        self.freq = freq
        self.dirty = dirty

    def __repr__(self):
        return f"Slot({self.slot_id}, addr={self.addr}, dirty={self.dirty}, prio={self.prio})"


class OnlineHistory:
    """History source driven by a live :class:`HistoryQueue`."""

    def __init__(self, queue: HistoryQueue | None = None):
        self.queue = queue or HistoryQueue()

    def observe(self, io: IoRequest):
        popped = self.queue.observe(io)
        if popped is None:
            return None
        old, rtype = popped
        return old.offset, old.len, rtype.code


class PrecomputedHistory:
    """History source replaying codes from :func:`classify_trace`.

    Request t pops request t - window, exactly as the live queue would.
    """

    def __init__(self, offsets, lengths, codes, window: int = 64):
        self.offsets = offsets if isinstance(offsets, list) else list(offsets)
        self.lengths = lengths if isinstance(lengths, list) else list(lengths)
        self.codes = codes if isinstance(codes, list) else [int(c) for c in codes]
        self.window = window
        self.t = 0

    def observe(self, io) -> tuple | None:
        t = self.t
        self.t = t + 1
        i = t - self.window
        if i < 0:
            return None
        return self.offsets[i], self.lengths[i], self.codes[i]


class StreamTracker:
    """Per-pid contiguous-run detection for the sequential-stream filter."""

    def __init__(self, threshold: int = STREAM_BYPASS_BYTES):
        self.threshold = threshold
        self.runs: dict[int, tuple[int, int]] = {}

    def check(self, io) -> bool:
        """True when ``io`` belongs to a run longer than the threshold."""
        nxt, run = self.runs.get(io.pid, (None, 0))
        run = run + io.len if io.offset == nxt else io.len
        self.runs[io.pid] = (io.offset + io.len, run)
        return run > self.threshold


def _set_hash(line_index: int, n_sets: int) -> int:
    return (((line_index * _GOLDEN) & _M64) >> 32) % n_sets


class ReCAEngine:
    """Workload-aware SSD cache with online reconfiguration."""

    name = "reca"

    def __init__(self, table, cache_bytes: int, devices: DeviceModel | None = None, *,
                 initial=None, window: int = 100_000, set_lines: int = 256, promo_cap: int = 64,
                 evict_budget: int = 128, budget_period: int = 1000, ptable_factor: int = 8,
                 stream_threshold: int = STREAM_BYPASS_BYTES, neighbor_lines: int = 8,
                 history=None, audit: bool = False, track_footprint: bool = False):
        self.handle = table if isinstance(table, TableHandle) else TableHandle(table)
        tbl = self.handle.table
        self.category = tbl.records[0] if initial is None else tbl.get(initial)
        self.table_version = tbl.version
        self.devices = devices or DeviceModel()
        self.cache_bytes = cache_bytes
        self.window = window
        self.set_lines = set_lines
        self.promo_cap = promo_cap
        self.evict_budget = evict_budget
        self.budget_period = budget_period
        self.ptable_factor = ptable_factor
        self.neighbor_lines = neighbor_lines
        self.history = history or OnlineHistory()
        self.audit = audit
        self.track_footprint = track_footprint
        self.streams = StreamTracker(stream_threshold)

        self.line_size = self.category.cache_line_size
        self.capacity = self._lines_for(self.line_size)
        self.ptable = PriorityTable(self.category, self.line_size, self.ptable_factor * self.capacity)
        self._apply_policy(self.category)

        self.stats = EngineStats()
        self.tick = 0
        self.req_index = -1
        self.now = 0.0
        self.bg_free = 0.0
        self.pending: deque = deque()  # (done_us, backfill_addr or None)
        self.backlog: deque = deque()  # backfill addrs waiting for queue space
        self.win_counts = [0] * 6
        self.win_over = 0
        self.win_n = 0
        self.win_pages: set[int] = set()
        self.last_footprint = 0
        self.last_features = None
        self.timeline: list[tuple[int, str]] = [(0, self.category.name)]
        self.on_analyze = None

        self.throttle = False
        self._budget_block = -1
        self._block_evictions = 0
        self.recovery_block_evictions: dict[int, int] = {}
        self.audit_log: list[str] = []

        self.index: dict[int, Slot] = {}
        self._build_sets(self.capacity, [])

    # -- geometry ---------------------------------------------------------

    def _lines_for(self, line_size: int) -> int:
        return max(1, self.cache_bytes // line_size)

    def _build_sets(self, capacity: int, slots: list[Slot]) -> None:
        """(Re)create the set structure and place ``slots``; trims overflow."""
        self.capacity = capacity
        n_sets = max(1, -(-capacity // self.set_lines))
        base, extra = divmod(capacity, n_sets)
        self.n_sets = n_sets
        self.set_cap = [base + (1 if i < extra else 0) for i in range(n_sets)]
        self.sets = [OrderedDict() for _ in range(n_sets)]
        self.slots: list[Slot | None] = [None] * capacity
        self.index = {}
        ls = self.line_size
        buckets: list[list[Slot]] = [[] for _ in range(n_sets)]
        for s in slots:
            s.set_id = _set_hash(s.addr // ls, n_sets)
            buckets[s.set_id].append(s)
        next_id = 0
        for sid, bucket in enumerate(buckets):
            bucket.sort(key=lambda s: s.stamp)
            over = len(bucket) - self.set_cap[sid]
            if over > 0:
                doomed = set(map(id, self._lowest(bucket, over)))
                keep = []
                for s in bucket:
                    if id(s) in doomed:
                        self._drop_line(s, structural=True)
                    else:
                        keep.append(s)
                bucket = keep
            S = self.sets[sid]
            for s in bucket:
                s.slot_id = next_id
                self.slots[next_id] = s
                next_id += 1
                S[s.addr] = s
                self.index[s.addr] = s
        self.free_ids = list(range(capacity - 1, next_id - 1, -1))
        self._rebuild_heaps()

    def _heap_score(self, s: Slot) -> float:
        return s.freq if self.eviction is Eviction.FREQUENCY else s.prio

    def _rebuild_heaps(self) -> None:
        """Per-set lazy min-heaps of (score, stamp, addr) for the score-ordered policies."""
        self._heaped = self.eviction in (Eviction.FREQUENCY, Eviction.PRIORITY_READ_FAVOR)
        self.heaps = []
        if not self._heaped:
            return
        for S in self.sets:
            h = [(self._heap_score(x), x.stamp, x.addr) for x in S.values()]
            heapq.heapify(h)
            self.heaps.append(h)

    def _heap_push(self, s: Slot) -> None:
        h = self.heaps[s.set_id]
        heapq.heappush(h, (self._heap_score(s), s.stamp, s.addr))
        if len(h) > 4 * self.set_cap[s.set_id] + 16:
            S = self.sets[s.set_id]
            h[:] = [(self._heap_score(x), x.stamp, x.addr) for x in S.values()]
            heapq.heapify(h)

    def _heap_min(self, sid: int) -> Slot:
        h = self.heaps[sid]
        S = self.sets[sid]
        while True:
            score, stamp, addr = h[0]
            x = S.get(addr)
            if x is not None and x.stamp == stamp and self._heap_score(x) == score:
                return x
            heapq.heappop(h)

    def _lowest(self, bucket: list[Slot], k: int) -> list[Slot]:
        """The k lowest-scoring slots of a recency-ordered bucket."""
        scores = self._scores(bucket)
        order = sorted(range(len(bucket)), key=lambda i: (scores[i], i))
        return [bucket[i] for i in order[:k]]

    def _scores(self, bucket: list[Slot], incoming_freq: float | None = None) -> list:
        """Victim scores for a recency-ordered list of slots.

        With ``incoming_freq`` the list is extended by a virtual most-recent
        entry (the block asking for admission), whose score is last.
        """
        ev = self.eviction
        if ev is Eviction.FREQUENCY:
            sc = [s.freq for s in bucket]
            if incoming_freq is not None:
                sc.append(incoming_freq)
            return sc
        if ev is Eviction.RECENCY:
            sc = [s.stamp for s in bucket]
            if incoming_freq is not None:
                sc.append(self.tick + 1)
            return sc
        if ev is Eviction.PRIORITY_READ_FAVOR:
            return [s.prio for s in bucket]
        freqs = [s.freq for s in bucket]
        if incoming_freq is not None:
            freqs.append(incoming_freq)
        n = len(freqs)
        frank = [0] * n
        for r, i in enumerate(sorted(range(n), key=lambda i: (freqs[i], i))):
            frank[i] = r
        return [i + frank[i] for i in range(n)]

    # -- policy -----------------------------------------------------------

    def _apply_policy(self, rec) -> None:
        self.write_policy = rec.write_policy
        self.eviction = rec.eviction_policy
        self.stream_filter = rec.stream_filter

    def reconfigure(self, rec) -> None:
        """Switch to ``rec``'s configuration without flushing the cache."""
        self.stats.reconfigurations += 1
        if self.write_policy is WritePolicy.WRITE_BACK and rec.write_policy is not WritePolicy.WRITE_BACK:
            for s in sorted(self.index.values(), key=lambda s: s.addr):
                if s.dirty:
                    self.devices.bg_hdd(WRITE, self.line_size)
                    self.stats.flushes += 1
                    s.dirty = False
        self.category = rec
        self.ptable.switch_category(rec)
        self._apply_policy(rec)
        new_ls = rec.cache_line_size
        if new_ls != self.line_size:
            self._migrate(new_ls)
        for s in self.index.values():
            s.prio = self.ptable.get(s.addr)
            s.freq = self.ptable.accesses(s.addr)
        self._rebuild_heaps()
        self.throttle = True

    def _migrate(self, new_ls: int) -> None:
        old_ls = self.line_size
        new_cap = self._lines_for(new_ls)
        self.ptable.rescale(new_ls, max_entries=self.ptable_factor * new_cap)
        pages_new = new_ls // PAGE_SIZE
        full_new = (1 << pages_new) - 1
        old = sorted(self.index.values(), key=lambda s: s.addr)
        moved: list[Slot] = []
        missing: list[int] = []
        if new_ls < old_ls:
            k = old_ls // new_ls
            for s in old:
                for i in range(k):
                    bits = (s.bitmap >> (i * pages_new)) & full_new
                    if bits:
                        moved.append(Slot(-1, s.addr + i * new_ls, -1, bits, s.stamp, dirty=s.dirty))
        else:
            parents: dict[int, Slot] = {}
            pages_old = old_ls // PAGE_SIZE
            for s in old:
                pa = s.addr - s.addr % new_ls
                shift = (s.addr - pa) // PAGE_SIZE
                p = parents.get(pa)
                if p is None:
                    p = parents[pa] = Slot(-1, pa, -1, 0, s.stamp)
                    moved.append(p)
                p.bitmap |= (s.bitmap & ((1 << pages_old) - 1)) << shift
                p.dirty = p.dirty or s.dirty
                p.stamp = max(p.stamp, s.stamp)
        self.line_size = new_ls
        for s in moved:
            s.prio = self.ptable.get(s.addr)
            s.freq = self.ptable.accesses(s.addr)
        self._build_sets(new_cap, moved)
        if new_ls > old_ls:
            for s in sorted(self.index.values(), key=lambda s: s.addr):
                if s.bitmap != full_new:
                    missing.append(s.addr)
            self.backlog.extend(missing)
            self._fill_queue()

    # -- history / characterization --------------------------------------

    def _on_classified(self, offset: int, length: int, code: int) -> None:
        ls = self.line_size
        acc = self.ptable.accumulate
        first = offset - offset % ls
        end = offset + length
        a = first
        while a < end:
            acc(a, code)
            a += ls
        self.win_counts[code & 7] += 1
        if code & OVER_BIT:
            self.win_over += 1
        if self.track_footprint:
            p = offset // PAGE_SIZE
            self.win_pages.update(range(p, (end - 1) // PAGE_SIZE + 1))
        self.win_n += 1
        if self.win_n >= self.window:
            self._analyze()

    def _analyze(self) -> None:
        fv = features_from_counts(self.win_counts, self.win_over)
        tbl = self.handle.table
        try:
            rec = tbl.get(match_category(fv, tbl, current=self.category.name))
        except KeyError:
            rec = tbl.records[0]
        self.last_features = fv
        self.last_footprint = len(self.win_pages)
        self.win_counts = [0] * 6
        self.win_over = 0
        self.win_n = 0
        self.win_pages = set()
        self.throttle = False
        self.timeline.append((self.req_index, rec.name))
        if rec.name != self.category.name or tbl.version != self.table_version:
            self.table_version = tbl.version
            self.reconfigure(rec)
        if self.on_analyze is not None:
            self.on_analyze(self)

    # -- promotion queue --------------------------------------------------

    def _drain(self, now: float) -> None:
        pending = self.pending
        while pending and pending[0][0] <= now:
            _, addr = pending.popleft()
            if addr is not None:
                s = self.index.get(addr)
                if s is not None:
                    s.bitmap = (1 << (self.line_size // PAGE_SIZE)) - 1
        if self.backlog:
            self._fill_queue()

    def _enqueue(self, hdd_bytes: int, ssd_bytes: int, addr=None) -> None:
        cost = 0.0
        if hdd_bytes:
            cost += self.devices.bg_hdd(READ, hdd_bytes)
        if ssd_bytes:
            cost += self.devices.bg_ssd_write(ssd_bytes)
        start = self.bg_free if self.bg_free > self.now else self.now
        self.bg_free = start + cost
        self.pending.append((self.bg_free, addr))

    def _fill_queue(self) -> None:
        ls = self.line_size
        full = (1 << (ls // PAGE_SIZE)) - 1
        while self.backlog and len(self.pending) < self.promo_cap:
            addr = self.backlog.popleft()
            s = self.index.get(addr)
            if s is None or s.bitmap == full:
                continue
            nbytes = (ls // PAGE_SIZE - bin(s.bitmap).count("1")) * PAGE_SIZE
            self._enqueue(nbytes, nbytes, addr)
            self.stats.backfills += 1

    # -- cache manager ----------------------------------------------------

    def _alloc(self, addr: int, sid: int) -> Slot:
        self.tick += 1
        s = Slot(self.free_ids.pop(), addr, sid, (1 << (self.line_size // PAGE_SIZE)) - 1, self.tick,
                 self.ptable.get(addr), self.ptable.accesses(addr))
        self.slots[s.slot_id] = s
        self.sets[sid][addr] = s
        self.index[addr] = s
        if self._heaped:
            self._heap_push(s)
        return s

    def _drop_line(self, s: Slot, structural: bool = False, flush_fg: bool = False) -> float:
        """Remove ``s`` from the cache, flushing it if dirty."""
        lat = 0.0
        if s.dirty:
            if flush_fg:
                lat = self.devices.hdd(WRITE, s.addr, self.line_size)
            else:
                self.devices.bg_hdd(WRITE, self.line_size)
            self.stats.flushes += 1
            s.dirty = False
        if s.addr in self.index and self.index[s.addr] is s:
            del self.index[s.addr]
            del self.sets[s.set_id][s.addr]
            self.slots[s.slot_id] = None
            self.free_ids.append(s.slot_id)
        if structural:
            self.stats.structural_evictions += 1
        return lat

    def _budget_left(self) -> int:
        if not self.throttle:
            return 1 << 30
        block = self.req_index // self.budget_period
        if block != self._budget_block:
            self._budget_block = block
            self._block_evictions = 0
        return self.evict_budget - self._block_evictions

    def _count_evictions(self, n: int) -> None:
        self.stats.evictions += n
        if self.throttle:
            self._block_evictions += n
            self.stats.reconfig_evictions += n
            b = self._budget_block
            self.recovery_block_evictions[b] = self.recovery_block_evictions.get(b, 0) + n

    def cache_manager(self, addr: int):
        """Slot for ``addr`` (INVALID first, else displace the set minimum), or None.

        Returns ``(slot, flush_latency_us)`` or ``None``.
        """
        sid = _set_hash(addr // self.line_size, self.n_sets)
        S = self.sets[sid]
        if len(S) < self.set_cap[sid]:
            return self._alloc(addr, sid), 0.0
        if not S:
            return None
        budget = self._budget_left()
        if budget <= 0:
            return None
        ev = self.eviction
        if ev is Eviction.RECENCY:
            victim = next(iter(S.values()))
            vscore, incoming = victim.stamp, self.tick + 1
        elif ev is Eviction.FREQUENCY:
            victim = self._heap_min(sid)
            vscore, incoming = victim.freq, self.ptable.accesses(addr)
        elif ev is Eviction.PRIORITY_READ_FAVOR:
            victim = self._heap_min(sid)
            vscore, incoming = victim.prio, self.ptable.get(addr)
        else:
            bucket = list(S.values())
            sc = self._scores(bucket, self.ptable.accesses(addr))
            incoming = sc.pop()
            j = min(range(len(sc)), key=sc.__getitem__)
            victim, vscore = bucket[j], sc[j]
        if not vscore < incoming:
            return None
        if self.audit:
            self._audit_victim(S, victim, vscore)
        lat = self._evict(victim, budget)
        return self._alloc(addr, sid), lat

    def _evict(self, victim: Slot, budget: int) -> float:
        if self.eviction is not Eviction.NEIGHBOR_CLUSTER:
            self._count_evictions(1)
            return self._drop_line(victim, flush_fg=True)
        ls = self.line_size
        group = [victim]
        for d in range(1, self.neighbor_lines + 1):
            for a in (victim.addr - d * ls, victim.addr + d * ls):
                if len(group) >= budget:
                    break
                s = self.index.get(a)
                if s is not None:
                    group.append(s)
        group.sort(key=lambda s: s.addr)
        lat = 0.0
        run_start = run_end = None
        for s in group:
            if s.dirty:
                if run_end == s.addr:
                    run_end += ls
                else:
                    if run_start is not None:
                        lat += self.devices.hdd(WRITE, run_start, run_end - run_start)
                    run_start, run_end = s.addr, s.addr + ls
                self.stats.flushes += 1
                s.dirty = False
            self._drop_line(s)
        if run_start is not None:
            lat += self.devices.hdd(WRITE, run_start, run_end - run_start)
        self._count_evictions(len(group))
        return lat

    def _audit_victim(self, S, victim: Slot, vscore) -> None:
        bucket = list(S.values())
        ev = self.eviction
        if ev is Eviction.RECENCY:
            best = min(s.stamp for s in bucket)
        elif ev is Eviction.FREQUENCY:
            best = min(s.freq for s in bucket)
        elif ev is Eviction.PRIORITY_READ_FAVOR:
            best = min(s.prio for s in bucket)
        else:
            # independent rank-sum: recency rank by stamp, frequency rank by (freq, stamp)
            by_stamp = sorted(bucket, key=lambda s: s.stamp)
            by_freq = sorted(bucket + [None], key=lambda s: (s.freq, s.stamp) if s else (float("inf"), 0))
            rank = {id(s): i for i, s in enumerate(by_stamp)}
            fr = {id(s): i for i, s in enumerate(by_freq) if s is not None}
            best = min(rank[id(s)] + fr[id(s)] for s in bucket)
            del vscore
            vscore = rank[id(victim)] + fr[id(victim)]
        if vscore > best:
            self.audit_log.append(f"req {self.req_index}: victim score {vscore} > set minimum {best}")

    # -- request path -----------------------------------------------------

    def on_request(self, io, now: float = 0.0) -> float:
        """Process one request; returns its foreground latency in us."""
        self.now = now
        if self.pending and self.pending[0][0] <= now or self.backlog:
            self._drain(now)
        self.req_index += 1
        self.stats.requests += 1
        popped = self.history.observe(io)
        if popped is not None:
            self._on_classified(*popped)
        bypass = self.stream_filter and self.streams.check(io)
        return self._lookup(io, bypass, False, None)

    def lookup(self, io, uncachable: bool = False) -> list[BlockRoute]:
        """Serve ``io`` block by block without touching the history queue."""
        routes: list[BlockRoute] = []
        self.last_latency = self._lookup(io, False, uncachable, routes)
        return routes

    def _lookup(self, io, bypass: bool, uncachable: bool, routes) -> float:
        ls = self.line_size
        dev = self.devices
        st = self.stats
        index = self.index
        op = io.op
        offset = io.offset
        end = offset + io.len
        addr = offset - offset % ls
        lat = 0.0
        while addr < end:
            b0 = offset if offset > addr else addr
            b1 = addr + ls if addr + ls < end else end
            blen = b1 - b0
            need = ((1 << (blen // PAGE_SIZE or 1)) - 1) << ((b0 - addr) // PAGE_SIZE)
            st.blocks += 1
            s = index.get(addr)
            if uncachable:
                if s is not None:
                    self._drop_line(s, flush_fg=True)
                    st.invalidations += 1
                lat += dev.hdd(op, b0, blen)
                route = MISS_BYPASS
            elif op == READ:
                route, l = self._read_block(s, addr, b0, blen, need, bypass)
                lat += l
            else:
                route, l = self._write_block(s, addr, b0, blen, need, bypass)
                lat += l
            if route is HIT or route is HIT_PARTIAL:
                st.hits += 1
                if route is HIT_PARTIAL:
                    st.hits_partial += 1
            else:
                st.misses += 1
                if route is MISS_PROMOTE:
                    st.promotions += 1
                else:
                    st.bypasses += 1
            if routes is not None:
                routes.append(BlockRoute(addr, route))
            addr += ls
        return lat

    def _touch(self, s: Slot) -> None:
        self.tick += 1
        s.stamp = self.tick
        self.sets[s.set_id].move_to_end(s.addr)
        s.prio = self.ptable.get(s.addr)
        s.freq = self.ptable.accesses(s.addr)
        if self._heaped:
            self._heap_push(s)

    def _ssd_addr(self, s: Slot, b0: int) -> int:
        return s.slot_id * self.line_size + (b0 - s.addr)

    def _read_block(self, s, addr, b0, blen, need, bypass):
        dev = self.devices
        if s is not None:
            self._touch(s)
            if s.bitmap & need == need:
                return HIT, dev.ssd(READ, self._ssd_addr(s, b0), blen)
            # missing subpage after a grow: synchronous disk read, then fill
            lat = dev.hdd(READ, b0, blen)
            dev.bg_ssd_write(blen)
            s.bitmap |= need
            return HIT_PARTIAL, lat
        if bypass:
            return MISS_BYPASS, dev.hdd(READ, b0, blen)
        if len(self.pending) >= self.promo_cap:
            self.stats.promo_overflow += 1
            return MISS_BYPASS, dev.hdd(READ, b0, blen)
        got = self.cache_manager(addr)
        if got is None:
            return MISS_BYPASS, dev.hdd(READ, b0, blen)
        _, flush = got
        lat = flush + dev.hdd(READ, b0, blen)
        self._enqueue(self.line_size, self.line_size)
        return MISS_PROMOTE, lat

    def _write_block(self, s, addr, b0, blen, need, bypass):
        dev = self.devices
        wp = self.write_policy
        if wp is WritePolicy.READ_ONLY:
            if s is not None:
                self._drop_line(s)
                self.stats.invalidations += 1
            return MISS_BYPASS, dev.hdd(WRITE, b0, blen)
        if wp is WritePolicy.WRITE_THROUGH:
            h = dev.hdd(WRITE, b0, blen)
            if s is None:
                return MISS_BYPASS, h
            self._touch(s)
            x = dev.ssd(WRITE, self._ssd_addr(s, b0), blen, user=True)
            s.bitmap |= need
            return HIT, h if h > x else x
        # write-back
        if s is not None:
            self._touch(s)
            s.dirty = True
            s.bitmap |= need
            return HIT, dev.ssd(WRITE, self._ssd_addr(s, b0), blen, user=True)
        partial = blen < self.line_size
        if bypass or (partial and len(self.pending) >= self.promo_cap):
            if not bypass:
                self.stats.promo_overflow += 1
            return MISS_BYPASS, dev.hdd(WRITE, b0, blen)
        got = self.cache_manager(addr)
        if got is None:
            return MISS_BYPASS, dev.hdd(WRITE, b0, blen)
        s, flush = got
        s.dirty = True
        if partial:
            self._enqueue(self.line_size - blen, self.line_size - blen)
        return MISS_PROMOTE, flush + dev.ssd(WRITE, self._ssd_addr(s, b0), blen, user=True)

    # -- capacity ---------------------------------------------------------

    def resize(self, cache_bytes: int) -> None:
        """Change the cache capacity, evicting lowest-scoring lines if shrinking."""
        if cache_bytes == self.cache_bytes:
            return
        self.cache_bytes = cache_bytes
        cap = self._lines_for(self.line_size)
        self.ptable.rescale(self.line_size, max_entries=self.ptable_factor * cap)
        self._build_sets(cap, list(self.index.values()))

    def flush_all(self) -> None:
        for s in list(self.index.values()):
            if s.dirty:
                self.devices.bg_hdd(WRITE, self.line_size)
                self.stats.flushes += 1
                s.dirty = False

    # -- invariants -------------------------------------------------------

    def check_invariants(self) -> list[str]:
        bad = []
        ls = self.line_size
        occupied = [s for s in self.slots if s is not None]
        if len(occupied) > self.capacity:
            bad.append(f"occupancy {len(occupied)} > capacity {self.capacity}")
        if len(occupied) != len(self.index):
            bad.append("slot array and index disagree in size")
        seen = set()
        for s in occupied:
            if s.addr in seen:
                bad.append(f"address {s.addr} cached twice")
            seen.add(s.addr)
            if self.index.get(s.addr) is not s:
                bad.append(f"index does not map {s.addr} to its slot")
            if s.addr % ls:
                bad.append(f"slot {s.slot_id} misaligned for line size {ls}")
            if s.dirty and self.write_policy is not WritePolicy.WRITE_BACK:
                bad.append(f"dirty slot {s.slot_id} under {self.write_policy.value}")
            if self.sets[s.set_id].get(s.addr) is not s:
                bad.append(f"slot {s.slot_id} missing from its set")
        for sid, S in enumerate(self.sets):
            if len(S) > self.set_cap[sid]:
                bad.append(f"set {sid} over capacity")
        if sum(len(S) for S in self.sets) != len(self.index):
            bad.append("set contents disagree with index")
        if len(self.pending) > self.promo_cap:
            bad.append(f"promotion queue length {len(self.pending)} > {self.promo_cap}")
        if len(self.ptable) > self.ptable.max_entries:
            bad.append("priority table over capacity")
        bad.extend(self.audit_log)
        return bad


def make_engine(table: CharacteristicsTable | TableHandle, cache_bytes: int, **kw) -> ReCAEngine:
    return ReCAEngine(table, cache_bytes, **kw)
