"""Reference engines: LRU, LARC and a global access-frequency cache.

All three use a fixed line size and write-through, share the request
splitting of the reconfigurable engine, and promote missed blocks with
the same background charge (one disk read plus one SSD write of the line).
"""
from __future__ import annotations

from collections import OrderedDict

from recasim.device import DeviceModel
from recasim.engine import HIT, MISS_BYPASS, MISS_PROMOTE, BlockRoute, EngineStats
from recasim.trace import READ, WRITE


class BaselineEngine:
    name = "base"

    def __init__(self, cache_bytes: int, devices: DeviceModel | None = None, line_size: int = 4096,
                 write_allocate: bool = True):
        self.line_size = line_size
        self.capacity = max(1, cache_bytes // line_size)
        self.devices = devices or DeviceModel()
        self.write_allocate = write_allocate
        self.stats = EngineStats()
        self.timeline: list = []
        self.slot_of: dict[int, int] = {}
        self.free_ids = list(range(self.capacity - 1, -1, -1))

    # subclasses: _hit(addr), _admit(addr) -> bool, _on_miss(addr)

    def on_request(self, io, now: float = 0.0) -> float:
        self.stats.requests += 1
        return self._serve(io, None)

    def lookup(self, io) -> list[BlockRoute]:
        routes: list[BlockRoute] = []
        self.stats.requests += 1
        self.last_latency = self._serve(io, routes)
        return routes

    def _serve(self, io, routes) -> float:
        ls = self.line_size
        dev = self.devices
        st = self.stats
        op = io.op
        offset = io.offset
        end = offset + io.len
        addr = offset - offset % ls
        lat = 0.0
        while addr < end:
            b0 = offset if offset > addr else addr
            b1 = addr + ls if addr + ls < end else end
            blen = b1 - b0
            st.blocks += 1
            sid = self.slot_of.get(addr)
            if sid is not None:
                self._hit(addr)
                st.hits += 1
                route = HIT
                ssd_off = sid * ls + (b0 - addr)
                if op == READ:
                    lat += dev.ssd(READ, ssd_off, blen)
                else:
                    h = dev.hdd(WRITE, b0, blen)
                    x = dev.ssd(WRITE, ssd_off, blen, user=True)
                    lat += h if h > x else x
            else:
                st.misses += 1
                lat += dev.hdd(op, b0, blen)
                if (op == READ or self.write_allocate) and self._admit(addr):
                    st.promotions += 1
                    route = MISS_PROMOTE
                    dev.bg_hdd(READ, ls)
                    dev.bg_ssd_write(ls)
                else:
                    st.bypasses += 1
                    route = MISS_BYPASS
            if routes is not None:
                routes.append(BlockRoute(addr, route))
            addr += ls
        return lat

    def _insert(self, addr: int) -> None:
        self.slot_of[addr] = self.free_ids.pop()

    def _remove(self, addr: int) -> None:
        self.free_ids.append(self.slot_of.pop(addr))
        self.stats.evictions += 1

    def check_invariants(self) -> list[str]:
        bad = []
        if len(self.slot_of) > self.capacity:
            bad.append("occupancy over capacity")
        if len(set(self.slot_of.values())) != len(self.slot_of):
            bad.append("slot shared by two addresses")
        return bad


class LRUEngine(BaselineEngine):
    """Textbook LRU over the whole cache, write-allocate."""

    name = "lru"

    def __init__(self, cache_bytes: int, devices=None, line_size: int = 4096):
        super().__init__(cache_bytes, devices, line_size, write_allocate=True)
        self.order: OrderedDict[int, None] = OrderedDict()

    def _hit(self, addr):
        self.order.move_to_end(addr)

    def _admit(self, addr):
        if len(self.order) >= self.capacity:
            victim, _ = self.order.popitem(last=False)
            self._remove(victim)
        self.order[addr] = None
        self._insert(addr)
        return True

    def cached(self) -> list[int]:
        return list(self.order)


class LARCEngine(LRUEngine):
    """Lazy adaptive replacement: a miss is admitted only on its second touch
    within the ghost window; the ghost queue holds addresses only.

    The ghost target shrinks on cache hits and grows on misses, bounded to
    [0.1 C, 0.9 C].
    """

    name = "larc"

    def __init__(self, cache_bytes: int, devices=None, line_size: int = 4096):
        super().__init__(cache_bytes, devices, line_size)
        c = float(self.capacity)
        self.ghost: OrderedDict[int, None] = OrderedDict()
        self.target = 0.1 * c
        self.ghost_hits = 0

    def _hit(self, addr):
        super()._hit(addr)
        c = float(self.capacity)
        self.target = max(0.1 * c, self.target - c / (c - self.target))

    def _admit(self, addr):
        c = float(self.capacity)
        self.target = min(0.9 * c, self.target + c / self.target)
        ghost = self.ghost
        if addr in ghost:
            del ghost[addr]
            self.ghost_hits += 1
            return super()._admit(addr)
        ghost[addr] = None
        limit = max(1, int(self.target))
        while len(ghost) > limit:
            ghost.popitem(last=False)
        return False


class FrequencyEngine(BaselineEngine):
    """Global per-line access counts; a miss displaces the least-counted cached
    line only if its own count is strictly greater."""

    name = "freq"

    def __init__(self, cache_bytes: int, devices=None, line_size: int = 4096):
        super().__init__(cache_bytes, devices, line_size, write_allocate=True)
        self.count: dict[int, int] = {}
        # cached lines bucketed by count, for O(1) minimum tracking
        self.buckets: dict[int, dict[int, None]] = {}
        self.min_count = 0

    def _bump(self, addr: int) -> int:
        c = self.count.get(addr, 0) + 1
        self.count[addr] = c
        return c

    def _serve(self, io, routes):
        ls = self.line_size
        a = io.offset - io.offset % ls
        while a < io.offset + io.len:
            c = self._bump(a)
            if a in self.slot_of:
                self._move(a, c - 1, c)
            a += ls
        return super()._serve(io, routes)

    def _move(self, addr, old, new):
        b = self.buckets[old]
        del b[addr]
        if not b:
            del self.buckets[old]
            if self.min_count == old:
                self.min_count = new
        self.buckets.setdefault(new, {})[addr] = None

    def _hit(self, addr):
        pass

    def _admit(self, addr):
        c = self.count[addr]
        if len(self.slot_of) >= self.capacity:
            if not c > self.min_count:
                return False
            b = self.buckets[self.min_count]
            victim = next(iter(b))
            del b[victim]
            if not b:
                del self.buckets[self.min_count]
            self._remove(victim)
        self._insert(addr)
        self.buckets.setdefault(c, {})[addr] = None
        if self.min_count not in self.buckets or c < self.min_count:
            self.min_count = min(self.buckets)
        return True


ENGINES = {"lru": LRUEngine, "larc": LARCEngine, "freq": FrequencyEngine}
