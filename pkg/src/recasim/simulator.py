"""Closed-loop trace replay, per-process characterization and engine comparison."""
from __future__ import annotations

import configparser
import csv
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from recasim.baselines import ENGINES as BASELINES
from recasim.classifier import QUEUE_LENGTH, classify_trace
from recasim.device import DeviceCounters, DeviceModel, DeviceParams
from recasim.engine import EngineStats, PrecomputedHistory, ReCAEngine
from recasim.profiles import CharacteristicsTable, TableHandle, default_table
from recasim.trace import PAGE_SIZE, Trace

ENGINE_NAMES = ("reca", "lru", "larc", "freq")
SERIES_WINDOW = 10_000


@dataclass
class RunConfig:
    cache_fraction: float = 0.20
    warmup_requests: int | None = None  # None: min(200k, 20% of the trace)
    workload_check_threshold: int = 100_000
    per_process: bool = False
    seed: int = 0
    initial_category: str | None = None
    baseline_line_size: int = 4096
    series_window: int = SERIES_WINDOW

    def __post_init__(self):
        if not 0 < self.cache_fraction <= 1:
            raise ValueError("cache_fraction must be in (0, 1]")
        if self.workload_check_threshold < 1:
            raise ValueError("workload_check_threshold must be positive")

    def warmup_for(self, n: int) -> int:
        w = min(200_000, n // 5) if self.warmup_requests is None else self.warmup_requests
        if w >= n:
            raise ValueError(f"warmup of {w} requests leaves nothing of a {n}-request trace")
        return w

    def cache_bytes(self, trace: Trace) -> int:
        pages = max(1, int(self.cache_fraction * trace.unique_pages))
        return pages * PAGE_SIZE


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def load_run_config(text: str) -> tuple[RunConfig, DeviceParams]:
    """Parse ``[run]`` and ``[devices]`` sections of a run-config file."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(text)
    kw: dict = {}
    if parser.has_section("run"):
        conv = {"cache_fraction": float, "warmup_requests": int, "workload_check_threshold": int,
                "seed": int, "initial_category": str, "baseline_line_size": int, "series_window": int}
        for k, v in parser.items("run"):
            if k == "per_process":
                if v.lower() not in _BOOL:
                    raise ValueError(f"per_process: expected a boolean, got {v!r}")
                kw[k] = _BOOL[v.lower()]
            elif k in conv:
                kw[k] = conv[k](v)
            else:
                raise ValueError(f"unknown [run] key {k!r}")
    params = DeviceParams()
    if parser.has_section("devices"):
        params = DeviceParams.from_mapping(dict(parser.items("devices")))
    return RunConfig(**kw), params


@dataclass
class Metrics:
    engine: str
    requests: int
    warmup_requests: int
    avg_response_us: float
    p50_response_us: float
    p95_response_us: float
    p99_response_us: float
    total_time_us: float
    hit_ratio: float
    blocks: int
    hits: int
    misses: int
    hits_partial: int
    promotions: int
    evictions: int
    bypasses: int
    ssd_writes_bytes: int
    ssd_user_write_bytes: int
    ssd_reads: int
    ssd_writes: int
    hdd_reads: int
    hdd_writes: int
    charged_ops: int
    background_us: float
    reconfigurations: int
    cache_lines: int
    category_timeline: list = field(default_factory=list)
    windowed_hit_ratio: list = field(default_factory=list)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("category_timeline")
        d.pop("windowed_hit_ratio")
        return d


class _Req:
    __slots__ = ("seq", "pid", "op", "offset", "len", "is_meta")

    def __init__(self, seq, pid, op, offset, length):
        self.seq = seq
        self.pid = pid
        self.op = op
        self.offset = offset
        self.len = length
        self.is_meta = False

    @property
    def end(self):
        return self.offset + self.len


def _history(trace: Trace, codes=None) -> PrecomputedHistory:
    if codes is None:
        codes = classify_trace(trace, QUEUE_LENGTH)
    return PrecomputedHistory(trace.offset.tolist(), trace.length.tolist(), codes.tolist(), QUEUE_LENGTH)


class PerProcessEngine:
    """One reconfigurable sub-cache per pid, sharing the devices.

    Capacity is split in proportion to each pid's page footprint over its
    last characterization window (at least 1% each) and rebalanced whenever
    any pid finishes a window.
    """

    name = "reca"
    MIN_SHARE = 0.01

    def __init__(self, trace: Trace, table, cache_bytes: int, devices: DeviceModel, **engine_kw):
        self.devices = devices
        self.cache_bytes = cache_bytes
        self.pids = trace.pids
        self.global_index: dict[int, np.ndarray] = {}
        self.engines: dict[int, ReCAEngine] = {}
        share = self.partition([1] * len(self.pids), cache_bytes)
        for p, b in zip(self.pids, share):
            idx = np.flatnonzero(trace.pid == p)
            sub = trace.select(idx)
            self.global_index[p] = idx
            e = ReCAEngine(table, b, devices, history=_history(sub), track_footprint=True, **engine_kw)
            e.on_analyze = self._rebalance
            self.engines[p] = e
        self.stats = EngineStats()

    @classmethod
    def partition(cls, footprints, total_bytes: int) -> list[int]:
        """Bytes per pid, proportional to footprint with a 1% floor, in whole pages."""
        fp = np.maximum(np.asarray(footprints, dtype=float), 1e-12)
        share = np.maximum(fp / fp.sum(), cls.MIN_SHARE)
        share /= share.sum()
        pages = total_bytes // PAGE_SIZE
        return [max(1, int(s * pages)) * PAGE_SIZE for s in share]

    def _rebalance(self, _engine=None) -> None:
        fps = [e.last_footprint or len(e.win_pages) or 1 for e in self.engines.values()]
        for e, b in zip(self.engines.values(), self.partition(fps, self.cache_bytes)):
            e.resize(b)

    def on_request(self, io, now: float = 0.0) -> float:
        return self.engines[io.pid].on_request(io, now)

    def aggregate_stats(self) -> EngineStats:
        s = EngineStats()
        for e in self.engines.values():
            s.add(e.stats)
        return s

    @property
    def timeline(self) -> list:
        out = []
        for p, e in self.engines.items():
            gi = self.global_index[p]
            for local, cat in e.timeline:
                out.append((int(gi[local]) if local < len(gi) else int(gi[-1]), cat, p))
        out.sort()
        return out

    @property
    def capacity(self) -> int:
        return sum(e.capacity for e in self.engines.values())

    def check_invariants(self) -> list[str]:
        bad = []
        for p, e in self.engines.items():
            bad.extend(f"pid {p}: {m}" for m in e.check_invariants())
        return bad


def make_engine(name: str, trace: Trace, cfg: RunConfig, table: CharacteristicsTable | TableHandle | None = None,
                params: DeviceParams | None = None, **engine_kw):
    """Engine ``name`` sized for ``trace`` under ``cfg``, with fresh devices."""
    devices = DeviceModel(params or DeviceParams())
    cache_bytes = cfg.cache_bytes(trace)
    if name == "reca":
        table = table if table is not None else default_table()
        kw = dict(initial=cfg.initial_category, window=cfg.workload_check_threshold, **engine_kw)
        if cfg.per_process:
            return PerProcessEngine(trace, table, cache_bytes, devices, **kw)
        return ReCAEngine(table, cache_bytes, devices, history=_history(trace), **kw)
    if name in BASELINES:
        return BASELINES[name](cache_bytes, devices, cfg.baseline_line_size)
    raise ValueError(f"unknown engine {name!r}; expected one of {', '.join(ENGINE_NAMES)}")


def _stats(engine) -> EngineStats:
    if isinstance(engine, PerProcessEngine):
        return engine.aggregate_stats()
    return engine.stats


def run(trace: Trace, engine, cfg: RunConfig | None = None, check_every: int = 0) -> Metrics:
    """Replay ``trace`` through ``engine``; each request issues when the previous completes.

    With ``check_every`` > 0, the engine's invariants are checked at that
    period and any violation raises AssertionError.
    """
    cfg = cfg or RunConfig()
    n = len(trace)
    if n == 0:
        raise ValueError("empty trace")
    warm = cfg.warmup_for(n)
    devices = engine.devices
    seqs, pids, ops = trace.seq.tolist(), trace.pid.tolist(), trace.op.tolist()
    offs, lens = trace.offset.tolist(), trace.length.tolist()
    lat = np.empty(n)
    series = []
    sw = cfg.series_window
    clock = 0.0
    st0 = EngineStats()
    dev0 = DeviceCounters()
    prev_hits = prev_blocks = 0
    on_request = engine.on_request
    per_process = isinstance(engine, PerProcessEngine)
    for i in range(n):
        if i == warm:
            st0 = _stats(engine).copy()
            dev0 = devices.counters.copy()
        l = on_request(_Req(seqs[i], pids[i], ops[i], offs[i], lens[i]), clock)
        clock += l
        lat[i] = l
        if (i + 1) % sw == 0 or i + 1 == n:
            s = _stats(engine) if per_process else engine.stats
            db = s.blocks - prev_blocks
            series.append((i + 1, (s.hits - prev_hits) / db if db else 0.0))
            prev_hits, prev_blocks = s.hits, s.blocks
        if check_every and (i + 1) % check_every == 0:
            bad = engine.check_invariants()
            if bad:
                raise AssertionError(f"after request {i + 1}: " + "; ".join(bad[:5]))
    st = _stats(engine)
    s = EngineStats(**{f.name: getattr(st, f.name) - getattr(st0, f.name) for f in fields(st)})
    d = devices.counters.minus(dev0)
    measured = lat[warm:]
    p50, p95, p99 = np.percentile(measured, [50, 95, 99])
    timeline = list(getattr(engine, "timeline", []))
    return Metrics(
        engine=engine.name, requests=n - warm, warmup_requests=warm,
        avg_response_us=float(measured.mean()), p50_response_us=float(p50), p95_response_us=float(p95),
        p99_response_us=float(p99), total_time_us=float(measured.sum()),
        hit_ratio=s.hits / s.blocks if s.blocks else 0.0, blocks=s.blocks, hits=s.hits, misses=s.misses,
        hits_partial=s.hits_partial, promotions=s.promotions, evictions=s.evictions, bypasses=s.bypasses,
        ssd_writes_bytes=d.ssd_host_writes_bytes, ssd_user_write_bytes=d.ssd_user_write_bytes,
        ssd_reads=d.ssd_reads, ssd_writes=d.ssd_writes, hdd_reads=d.hdd_reads, hdd_writes=d.hdd_writes,
        charged_ops=d.charged_ops, background_us=d.bg_us, reconfigurations=s.reconfigurations,
        cache_lines=engine.capacity, category_timeline=timeline, windowed_hit_ratio=series)


def replay_on_hdd(trace: Trace, params: DeviceParams | None = None) -> float:
    """Total closed-loop time (us) of ``trace`` served by the HDD alone."""
    dev = DeviceModel(params or DeviceParams())
    hdd = dev.hdd
    return float(sum(hdd(op, off, ln) for op, off, ln in
                     zip(trace.op.tolist(), trace.offset.tolist(), trace.length.tolist())))


def simulate(trace: Trace, engine: str = "reca", cfg: RunConfig | None = None, table=None,
             params: DeviceParams | None = None, **engine_kw) -> Metrics:
    cfg = cfg or RunConfig()
    return run(trace, make_engine(engine, trace, cfg, table, params, **engine_kw), cfg)


def run_per_process(trace: Trace, cfg: RunConfig | None = None, table=None,
                    params: DeviceParams | None = None) -> Metrics:
    cfg = RunConfig(**{**asdict(cfg or RunConfig()), "per_process": True})
    return simulate(trace, "reca", cfg, table, params)


@dataclass
class Comparison:
    metrics: list[Metrics]

    @property
    def has_lru(self) -> bool:
        return any(m.engine == "lru" for m in self.metrics)

    def rows(self) -> list[dict]:
        base = next((m for m in self.metrics if m.engine == "lru"), None)
        out = []
        for m in self.metrics:
            r = m.row()
            if base is not None:
                r["norm_avg_response"] = m.avg_response_us / base.avg_response_us if base.avg_response_us else 0.0
                r["norm_ssd_writes"] = m.ssd_writes_bytes / base.ssd_writes_bytes if base.ssd_writes_bytes else 0.0
            out.append(r)
        return out


def compare(trace: Trace, engines, cfg: RunConfig | None = None, table=None,
            params: DeviceParams | None = None) -> Comparison:
    """Run each engine on the same trace and device parameters."""
    names = []
    for e in engines:
        if e in names:
            warnings.warn(f"duplicate engine {e!r} ignored", stacklevel=2)
        else:
            names.append(e)
    return Comparison([simulate(trace, e, cfg, table, params) for e in names])


def write_rows(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def write_metrics(path, m: Metrics) -> tuple[str, str, str]:
    """Metrics row plus ``<path>.series.csv`` and ``<path>.timeline.csv``."""
    path = str(path)
    write_rows(path, [m.row()])
    series = path + ".series.csv"
    with open(series, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["request_index", "hit_ratio"])
        w.writerows(m.windowed_hit_ratio)
    timeline = path + ".timeline.csv"
    with open(timeline, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["request_index", "category", "pid"])
        for entry in m.category_timeline:
            w.writerow(list(entry) + ([""] if len(entry) == 2 else []))
    return path, series, timeline
