#!/usr/bin/env python3
"""Global versus per-process characterization on a two-pid mixed trace."""
import argparse

from recasim.profiles import default_table
from recasim.simulator import RunConfig, run_per_process, simulate, write_rows
from recasim.synth import generate_category_trace, interleave_processes


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", default="archival_consumers")
    ap.add_argument("--b", default="sequential_producer_consumers")
    ap.add_argument("--n", type=int, default=500_000, help="requests per process")
    ap.add_argument("--out", default="per_process.csv")
    a = ap.parse_args(argv)
    table = default_table()
    mixed = interleave_processes([generate_category_trace(table.get(a.a), a.n, 21),
                                  generate_category_trace(table.get(a.b), a.n, 22)], 23)
    glob = simulate(mixed, "reca", RunConfig(), table)
    per = run_per_process(mixed, RunConfig(), table)
    write_rows(a.out, [{"mode": "global", **glob.row()}, {"mode": "per_process", **per.row()}])
    print(f"global {glob.avg_response_us:.0f}us  per-process {per.avg_response_us:.0f}us  "
          f"speedup {glob.avg_response_us / per.avg_response_us:.3f}")


if __name__ == "__main__":
    main()
