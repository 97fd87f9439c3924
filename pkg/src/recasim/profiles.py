"""Characteristics table: category signatures, priority weights, cache configs.

The table lives in an INI-style data file so categories can be added or
retuned without code changes, including while a simulation runs
(:meth:`TableHandle.reload`).
"""
from __future__ import annotations

import configparser
import math
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import TextIO

import numpy as np

from recasim.classifier import FEATURE_KEYS, Access, FeatureVector

PAGE = 4096


class TableError(ValueError):
    pass


class WritePolicy(str, Enum):
    READ_ONLY = "read_only"
    WRITE_THROUGH = "write_through"
    WRITE_BACK = "write_back"


class Eviction(str, Enum):
    FREQUENCY = "frequency"
    RECENCY = "recency"
    PRIORITY_READ_FAVOR = "priority_read"
    RECENCY_FREQUENCY = "recency_frequency"
    NEIGHBOR_CLUSTER = "neighbor"


_ACCESS_NAMES = {"sequential": Access.SEQUENTIAL, "strided": Access.STRIDED, "random": Access.RANDOM}

DEFAULT_ACC = {Access.SEQUENTIAL: 1.0, Access.STRIDED: 4.0, Access.RANDOM: 8.0}
DEFAULT_RW = {(Access.RANDOM, 0): 4.0, (Access.RANDOM, 1): 1.0}
DEFAULT_OVER = 2.0


@dataclass(frozen=True)
class GenParams:
    """Synthetic-generator parameters attached to a category."""

    working_set_pages: int = 524288
    file_count: int = 1024
    mean_file_pages: int = 64
    zipf_s: float = 0.9
    request_pages: int = 1


@dataclass(frozen=True)
class CategoryRecord:
    id: int
    name: str
    signature: FeatureVector
    over_priority: float = DEFAULT_OVER
    acc_priority: dict = field(default_factory=lambda: dict(DEFAULT_ACC))
    rw_priority: dict = field(default_factory=lambda: dict(DEFAULT_RW))
    cache_line_size: int = PAGE
    write_policy: WritePolicy = WritePolicy.WRITE_THROUGH
    eviction_policy: Eviction = Eviction.RECENCY
    stream_filter: bool = False
    gen: GenParams = GenParams()

    def weight_table(self) -> list[float]:
        """Priority_Calc result for every type code 0..15."""
        w = [0.0] * 16
        for code in range(16):
            k = code & 7
            if k > 5:
                continue
            access = Access(k // 2)
            w[code] = (self.acc_priority.get(access, 0.0) + self.rw_priority.get((access, k % 2), 0.0)
                       + (self.over_priority if code & 8 else 0.0))
        return w

    def feature_weights(self) -> list[float]:
        """Per-counter weights in feature order, for recomputation from counters."""
        return [self.acc_priority.get(Access(k // 2), 0.0) + self.rw_priority.get((Access(k // 2), k % 2), 0.0)
                for k in range(6)]


@dataclass(frozen=True)
class CharacteristicsTable:
    records: tuple[CategoryRecord, ...]
    version: int = 1

    def __post_init__(self):
        if not self.records:
            raise TableError("table has no categories")
        names = [r.name for r in self.records]
        if len(set(names)) != len(names):
            raise TableError("duplicate category names")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.records]

    def get(self, name_or_id) -> CategoryRecord:
        for r in self.records:
            if r.name == name_or_id or r.id == name_or_id:
                return r
        raise KeyError(name_or_id)

    def signatures(self) -> np.ndarray:
        return np.array([r.signature.as_array() for r in self.records])


def _parse_float(section, key, value) -> float:
    try:
        v = float(value)
    except ValueError:
        raise TableError(f"[{section}] {key}: not a number: {value!r}") from None
    if not math.isfinite(v):
        raise TableError(f"[{section}] {key}: not finite")
    return v


def _parse_record(idx: int, section: str, items: dict) -> CategoryRecord:
    name = section.split(None, 1)[1].strip()
    sig = {}
    acc = dict(DEFAULT_ACC)
    rw = dict(DEFAULT_RW)
    over = DEFAULT_OVER
    kw: dict = {}
    gen: dict = {}
    for key, value in items.items():
        if key.startswith("sig."):
            k = key[4:]
            if k not in FEATURE_KEYS:
                raise TableError(f"[{section}] unknown key {key!r}")
            v = _parse_float(section, key, value)
            if not 0.0 <= v <= 1.0:
                raise TableError(f"[{section}] {key} must lie in [0, 1]")
            sig[k] = v
        elif key == "pr.over":
            over = _parse_float(section, key, value)
        elif key.startswith("pr.acc."):
            a = _ACCESS_NAMES.get(key[7:])
            if a is None:
                raise TableError(f"[{section}] unknown key {key!r}")
            acc[a] = _parse_float(section, key, value)
        elif key.startswith("pr.rw."):
            parts = key.split(".")
            if len(parts) != 4 or parts[2] not in _ACCESS_NAMES or parts[3] not in ("r", "w"):
                raise TableError(f"[{section}] unknown key {key!r}")
            rw[(_ACCESS_NAMES[parts[2]], 0 if parts[3] == "r" else 1)] = _parse_float(section, key, value)
        elif key == "line_size":
            try:
                size = int(value)
            except ValueError:
                raise TableError(f"[{section}] line_size: not an integer: {value!r}") from None
            if size < PAGE or size % PAGE or (size // PAGE) & (size // PAGE - 1):
                raise TableError(f"[{section}] line_size {size} is not a power-of-two multiple of 4096")
            kw["cache_line_size"] = size
        elif key == "write_policy":
            try:
                kw["write_policy"] = WritePolicy(value.strip().lower())
            except ValueError:
                raise TableError(f"[{section}] bad write_policy {value!r}") from None
        elif key == "eviction":
            try:
                kw["eviction_policy"] = Eviction(value.strip().lower())
            except ValueError:
                raise TableError(f"[{section}] bad eviction {value!r}") from None
        elif key == "stream_filter":
            if value.strip() not in ("0", "1"):
                raise TableError(f"[{section}] stream_filter must be 0 or 1")
            kw["stream_filter"] = value.strip() == "1"
        elif key.startswith("gen."):
            k = key[4:]
            if k not in GenParams.__dataclass_fields__:
                raise TableError(f"[{section}] unknown key {key!r}")
            gen[k] = _parse_float(section, key, value) if k == "zipf_s" else int(_parse_float(section, key, value))
        else:
            raise TableError(f"[{section}] unknown key {key!r}")
    missing = [k for k in FEATURE_KEYS if k not in sig]
    if missing:
        raise TableError(f"[{section}] missing signature keys: {', '.join('sig.' + k for k in missing)}")
    mix = sum(sig[k] for k in FEATURE_KEYS[:6])
    if abs(mix - 1.0) > 1e-6:
        raise TableError(f"[{section}] signature mix sums to {mix}, expected 1")
    return CategoryRecord(idx, name, FeatureVector.from_mapping(sig), over, acc, rw,
                          gen=GenParams(**gen), **kw)


def load_table(stream: TextIO | str, version: int = 1) -> CharacteristicsTable:
    text = stream if isinstance(stream, str) else stream.read()
    parser = configparser.ConfigParser(interpolation=None, strict=True, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateSectionError as exc:
        raise TableError(f"duplicate category [{exc.section}]") from None
    except configparser.Error as exc:
        raise TableError(f"syntax error: {exc}") from None
    records = []
    for section in parser.sections():
        if not section.startswith("category ") or not section.split(None, 1)[1:]:
            raise TableError(f"unexpected section [{section}]")
        records.append(_parse_record(len(records), section, dict(parser.items(section))))
    try:
        return CharacteristicsTable(tuple(records), version)
    except TableError as exc:
        raise TableError(str(exc)) from None


def default_table_text() -> str:
    return resources.files("recasim").joinpath("data/default_table.ini").read_text(encoding="utf-8")


def default_table() -> CharacteristicsTable:
    return load_table(default_table_text())


def load_table_file(path) -> CharacteristicsTable:
    with open(path, encoding="utf-8") as fh:
        return load_table(fh)


def match_category(features: FeatureVector, table: CharacteristicsTable, current=None) -> int:
    """Index of the record nearest to ``features`` (Euclidean, 7 dims).

    Ties prefer ``current`` (a record id or name), then the lowest index.
    """
    d = np.linalg.norm(table.signatures() - features.as_array(), axis=1)
    best = float(d.min())
    tied = [i for i, v in enumerate(d) if v <= best * (1 + 1e-12) + 1e-15]
    if current is not None:
        for i in tied:
            r = table.records[i]
            if r.id == current or r.name == current:
                return r.id
    return table.records[tied[0]].id


def reload(table: CharacteristicsTable, stream: TextIO | str) -> CharacteristicsTable:
    """Parse a replacement table; version is bumped. Raises on error."""
    new = load_table(stream)
    return replace(new, version=table.version + 1)


class TableHandle:
    """Atomically swappable reference to the active table."""

    def __init__(self, table: CharacteristicsTable):
        self._table = table
        self._lock = threading.Lock()

    @property
    def table(self) -> CharacteristicsTable:
        return self._table

    def reload(self, stream: TextIO | str) -> CharacteristicsTable:
        with self._lock:
            new = reload(self._table, stream)  # raises before publishing
            self._table = new
            return new
