#!/usr/bin/env python3
"""HDD-only closed-loop time of the W1..W8 interleaving workloads."""
import argparse
import csv
import sys

from recasim.simulator import replay_on_hdd
from recasim.synth import WORKLOADS, generate_interleaving_workload


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", help="CSV path (default stdout)")
    a = ap.parse_args(argv)
    out = open(a.out, "w", newline="") if a.out else sys.stdout
    w = csv.writer(out)
    w.writerow(["workload", "requests", "total_s", "norm_to_W1"])
    base = None
    for name in sorted(WORKLOADS):
        t = generate_interleaving_workload(name, a.seed)
        total = replay_on_hdd(t) / 1e6
        base = base or total
        w.writerow([name, len(t), f"{total:.2f}", f"{total / base:.3f}"])


if __name__ == "__main__":
    main()
