"""HDD and SSD latency model with per-device head state and op accounting.

Each device remembers where its previous foreground access ended. A new
access is sequential when it starts exactly there, strided when it starts
a little further on (gap up to ``STRIDE_GAP``), and random otherwise. This
single piece of state is what makes interleaved streams look random to the
disk. Background jobs (promotions, flushes issued off the request path) are
costed as random accesses and do not move the foreground head.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from recasim.trace import SECTOR, WRITE

US = 1e6
STRIDE_GAP = 16 * 1024
SSD_PAGE = 4096

SEQUENTIAL, STRIDED, RANDOM = "sequential", "strided", "random"


@dataclass(frozen=True)
class DeviceParams:
    hdd_seq_bw: float = 120e6
    hdd_rnd_read_iops: float = 80.0
    hdd_rnd_write_iops: float = 150.0
    hdd_strided_read_mult: float = 3.0
    hdd_strided_write_mult: float = 1.3
    ssd_seq_read_bw: float = 480e6
    ssd_seq_write_bw: float = 440e6
    ssd_rnd_read_iops: float = 20000.0
    ssd_rnd_write_iops: float = 30000.0
    ssd_strided_mult: float = 1.1

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "DeviceParams":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown device keys: {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in values.items()})


@dataclass
class DeviceState:
    last_end: int | None = None


@dataclass
class DeviceCounters:
    hdd_reads: int = 0
    hdd_writes: int = 0
    ssd_reads: int = 0
    ssd_writes: int = 0
    hdd_read_bytes: int = 0
    hdd_write_bytes: int = 0
    ssd_read_bytes: int = 0
    ssd_host_writes_bytes: int = 0
    ssd_user_write_bytes: int = 0
    charged_ops: int = 0
    fg_us: float = 0.0
    bg_us: float = 0.0

    def copy(self) -> "DeviceCounters":
        return DeviceCounters(**{f.name: getattr(self, f.name) for f in fields(self)})

    def minus(self, other: "DeviceCounters") -> "DeviceCounters":
        return DeviceCounters(**{f.name: getattr(self, f.name) - getattr(other, f.name) for f in fields(self)})


def _check_len(length: int) -> None:
    if length <= 0 or length % SECTOR:
        raise ValueError(f"length {length} is not a positive multiple of {SECTOR}")


def hdd_latency(params: DeviceParams, state: DeviceState, op: int, offset: int, length: int) -> float:
    """Latency in microseconds of one HDD access; updates ``state``."""
    _check_len(length)
    kind = _kind(state, offset)
    state.last_end = offset + length
    transfer = length / params.hdd_seq_bw
    if kind == SEQUENTIAL:
        return transfer * US
    if kind == STRIDED:
        mult = params.hdd_strided_write_mult if op == WRITE else params.hdd_strided_read_mult
        return transfer * mult * US
    iops = params.hdd_rnd_write_iops if op == WRITE else params.hdd_rnd_read_iops
    return (1.0 / iops + transfer) * US


def ssd_latency(params: DeviceParams, state: DeviceState, op: int, offset: int, length: int) -> float:
    """Latency in microseconds of one SSD access; updates ``state``."""
    _check_len(length)
    kind = _kind(state, offset)
    state.last_end = offset + length
    bw = params.ssd_seq_write_bw if op == WRITE else params.ssd_seq_read_bw
    if kind == SEQUENTIAL:
        return length / bw * US
    if kind == STRIDED:
        return length / bw * params.ssd_strided_mult * US
    iops = params.ssd_rnd_write_iops if op == WRITE else params.ssd_rnd_read_iops
    return (1.0 / iops + max(0, length - SSD_PAGE) / bw) * US


def _kind(state: DeviceState, offset: int) -> str:
    if state.last_end is None:
        return RANDOM
    gap = offset - state.last_end
    if gap == 0:
        return SEQUENTIAL
    if 0 < gap <= STRIDE_GAP:
        return STRIDED
    return RANDOM


@dataclass
class DeviceModel:
    """One HDD and one SSD sharing a parameter set, plus op counters."""

    params: DeviceParams = field(default_factory=DeviceParams)
    hdd_state: DeviceState = field(default_factory=DeviceState)
    ssd_state: DeviceState = field(default_factory=DeviceState)
    counters: DeviceCounters = field(default_factory=DeviceCounters)

    def hdd(self, op: int, offset: int, length: int) -> float:
        us = hdd_latency(self.params, self.hdd_state, op, offset, length)
        c = self.counters
        c.charged_ops += 1
        if op == WRITE:
            c.hdd_writes += 1
            c.hdd_write_bytes += length
        else:
            c.hdd_reads += 1
            c.hdd_read_bytes += length
        c.fg_us += us
        return us

    def ssd(self, op: int, offset: int, length: int, user: bool = False) -> float:
        us = ssd_latency(self.params, self.ssd_state, op, offset, length)
        c = self.counters
        c.charged_ops += 1
        if op == WRITE:
            c.ssd_writes += 1
            c.ssd_host_writes_bytes += length
            if user:
                c.ssd_user_write_bytes += length
        else:
            c.ssd_reads += 1
            c.ssd_read_bytes += length
        c.fg_us += us
        return us

    def bg_hdd(self, op: int, length: int) -> float:
        """Background HDD access: random-cost, head state untouched."""
        p = self.params
        iops = p.hdd_rnd_write_iops if op == WRITE else p.hdd_rnd_read_iops
        us = (1.0 / iops + length / p.hdd_seq_bw) * US
        c = self.counters
        c.charged_ops += 1
        if op == WRITE:
            c.hdd_writes += 1
            c.hdd_write_bytes += length
        else:
            c.hdd_reads += 1
            c.hdd_read_bytes += length
        c.bg_us += us
        return us

    def bg_ssd_write(self, length: int) -> float:
        p = self.params
        us = (1.0 / p.ssd_rnd_write_iops + max(0, length - SSD_PAGE) / p.ssd_seq_write_bw) * US
        c = self.counters
        c.charged_ops += 1
        c.ssd_writes += 1
        c.ssd_host_writes_bytes += length
        c.bg_us += us
        return us

    def fresh(self) -> "DeviceModel":
        return DeviceModel(self.params)


def load_device_params(text: str) -> DeviceParams:
    """Read the ``[devices]`` section of a run-config file (defaults if absent)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(text)
    if not parser.has_section("devices"):
        return DeviceParams()
    return DeviceParams.from_mapping(dict(parser.items("devices")))
