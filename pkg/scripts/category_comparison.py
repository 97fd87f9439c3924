#!/usr/bin/env python3
"""Every engine on every synthetic category trace; one CSV row per (category, engine)."""
import argparse
import time

from recasim.profiles import default_table
from recasim.simulator import ENGINE_NAMES, RunConfig, compare, write_rows
from recasim.synth import generate_category_trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--cache-fraction", type=float, default=0.2)
    ap.add_argument("--categories", default="", help="comma list; default all")
    ap.add_argument("--out", default="category_comparison.csv")
    a = ap.parse_args(argv)
    table = default_table()
    names = [c for c in a.categories.split(",") if c] or list(table.names)
    rows = []
    for i, name in enumerate(names):
        t0 = time.perf_counter()
        tr = generate_category_trace(table.get(name), a.n, a.seed + i)
        res = compare(tr, ENGINE_NAMES, RunConfig(cache_fraction=a.cache_fraction), table)
        for r in res.rows():
            rows.append({"category": name, **r})
        best = min(res.metrics, key=lambda m: m.avg_response_us)
        print(f"{name}: best {best.engine} {best.avg_response_us:.0f}us ({time.perf_counter() - t0:.0f}s)")
    write_rows(a.out, rows)
    print(a.out)


if __name__ == "__main__":
    main()
