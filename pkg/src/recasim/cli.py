"""recasim command line: simulate, characterize, generate, compare, report."""
from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings

import numpy as np

from recasim.classifier import FEATURE_KEYS, FEATURES, OVER_BIT, classify_trace, code_features
from recasim.profiles import TableError, default_table, load_table_file, match_category
from recasim.simulator import (ENGINE_NAMES, RunConfig, compare, load_run_config, make_engine, run,
                               write_metrics, write_rows)
from recasim.synth import WORKLOADS, GenerationError, generate_category_trace, generate_interleaving_workload
from recasim.trace import TraceError, load_trace, save_trace

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _table(path):
    path = path or os.environ.get("RECA_TABLE")
    return load_table_file(path) if path else default_table()


def _config(path) -> tuple:
    if not path:
        return RunConfig(), None
    with open(path) as f:
        return load_run_config(f.read())


def cmd_simulate(a) -> int:
    trace = load_trace(a.trace)
    table = _table(a.table)
    cfg, params = _config(a.config)
    if a.per_process:
        cfg.per_process = True
    m = run(trace, make_engine(a.engine, trace, cfg, table, params), cfg)
    for p in write_metrics(a.out, m):
        print(p)
    return 0


def cmd_characterize(a) -> int:
    trace = load_trace(a.trace)
    if len(trace) == 0:
        raise TraceError("trace is empty")
    table = _table(a.table)
    codes = classify_trace(trace)
    valid = np.flatnonzero(codes >= 0)
    if valid.size == 0:
        raise TraceError(f"trace has {len(trace)} requests; at least 65 are needed to classify any")
    w = a.window
    out = csv.writer(sys.stdout)
    out.writerow(["window", "first_request", "last_request"] + list(FEATURE_KEYS) + ["category"])
    votes: dict[str, int] = {}
    current = None
    for k, start in enumerate(range(0, valid.size, w)):
        idx = valid[start:start + w]
        fv = code_features(codes[idx])
        current = table.get(match_category(fv, table, current)).name
        votes[current] = votes.get(current, 0) + len(idx)
        out.writerow([k, int(idx[0]) + 1, int(idx[-1]) + 1] + [f"{x:.4f}" for x in fv.as_array()] + [current])
    dominant = max(votes, key=votes.get)
    total = code_features(codes[valid])
    print(f"# dominant category: {dominant}")
    print("# request-type breakdown: " + " ".join(f"{k}={v:.4f}" for k, v in total.as_dict().items()))
    meta = trace.is_meta[valid]
    if meta.any():
        c = codes[valid]
        print("# metadata breakdown (fraction of each request type that is metadata):")
        for i, name in enumerate(FEATURES):
            sel = (c & 7) == i
            frac = meta[sel].mean() if sel.any() else 0.0
            print(f"#   {name}: {frac:.4f} ({int(meta[sel].sum())}/{int(sel.sum())})")
        sel = (c & OVER_BIT) != 0
        print(f"#   over: {meta[sel].mean() if sel.any() else 0.0:.4f} ({int(meta[sel].sum())}/{int(sel.sum())})")
        print(f"#   all: {meta.mean():.4f}")
    return 0


def cmd_generate(a) -> int:
    if a.workload:
        trace = generate_interleaving_workload(a.workload, a.seed)
    else:
        table = _table(a.table)
        if a.category not in table.names:
            raise UsageError(f"unknown category {a.category!r}; known: {', '.join(table.names)}")
        trace = generate_category_trace(table.get(a.category), a.n, a.seed)
    save_trace(trace, a.out)
    print(f"{len(trace)} requests -> {a.out}")
    return 0


def cmd_compare(a) -> int:
    names = [e.strip() for e in a.engines.split(",") if e.strip()]
    bad = [e for e in names if e not in ENGINE_NAMES]
    if bad or not names:
        raise UsageError(f"unknown engine(s) {', '.join(bad) or '(none)'}; expected {', '.join(ENGINE_NAMES)}")
    trace = load_trace(a.trace)
    cfg, params = _config(a.config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = compare(trace, names, cfg, _table(a.table), params)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_rows(a.out, result.rows())
    print(a.out)
    return 0


REPORT_COLUMNS = ("engine", "avg_response_us", "p99_response_us", "hit_ratio", "ssd_writes_bytes",
                  "promotions", "evictions", "norm_avg_response")


def cmd_report(a) -> int:
    rows = []
    for path in a.inputs:
        with open(path, newline="") as f:
            for r in csv.DictReader(f):
                r["source"] = os.path.basename(path)
                rows.append(r)
    if not rows:
        raise TraceError("no metric rows found")
    cols = ["source"] + [c for c in REPORT_COLUMNS if c in rows[0]]
    table = [cols] + [[_fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    for row in table:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    return 0


def _fmt(v: str) -> str:
    try:
        x = float(v)
    except ValueError:
        return v
    return f"{x:.4f}" if abs(x) < 10 and not x.is_integer() else f"{x:.0f}"


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="recasim", description="Reconfigurable SSD-cache trace simulator")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="replay a trace through one engine")
    s.add_argument("--trace", required=True)
    s.add_argument("--engine", choices=ENGINE_NAMES, default="reca")
    s.add_argument("--table")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--per-process", action="store_true")
    s.set_defaults(fn=cmd_simulate)

    c = sub.add_parser("characterize", help="classify a trace and match categories per window")
    c.add_argument("--trace", required=True)
    c.add_argument("--table")
    c.add_argument("--window", type=int, default=100_000)
    c.set_defaults(fn=cmd_characterize)

    g = sub.add_parser("generate", help="write a synthetic trace")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--category")
    src.add_argument("--workload", choices=sorted(WORKLOADS))
    g.add_argument("--n", type=int, default=1_000_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--table")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    m = sub.add_parser("compare", help="run several engines on one trace")
    m.add_argument("--trace", required=True)
    m.add_argument("--engines", default="lru,larc,freq,reca")
    m.add_argument("--table")
    m.add_argument("--config")
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_compare)

    r = sub.add_parser("report", help="print metric CSVs as an aligned table")
    r.add_argument("inputs", nargs="+")
    r.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    if getattr(a, "window", 1) < 1:
        parser.error("--window must be positive")
    try:
        return a.fn(a)
    except UsageError as e:
        print(f"recasim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, TraceError, TableError, GenerationError, ValueError, KeyError) as e:
        print(f"recasim: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
