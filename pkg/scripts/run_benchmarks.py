#!/usr/bin/env python3
"""Run the benchmark matrix and compare probe counts with the reference table.

Usage: python3 scripts/run_benchmarks.py [--only f1,f4] [--seed 0] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import sys

from ffrecon.cli import BENCH_ORDERS, run_bench

# (function, scan, reordered) -> reference probe count
REFERENCE = {
    ("f1", False, False): 87138,
    ("f1", False, True): 41628,
    ("f1", True, False): 84569,
    ("f1", True, True): 22617,
    ("f2", False, False): 162683,
    ("f2", True, False): 155231,
    ("f3", False, False): 332894,
    ("f3", True, False): 320801,
    ("f4", False, False): 139512,
    ("f4", False, True): 54212,
    ("f4", True, False): 137295,
    ("f4", True, True): 34349,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", default=None, help="comma-separated subset of f1..f4")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--json", default=None, help="write all reports to this file")
    args = ap.parse_args(argv)
    only = set(args.only.split(",")) if args.only else None

    rows = []
    ok = True
    print(f"{'fn':4} {'scan':5} {'order':8} {'probes':>8} {'ref':>8} {'ratio':>6} {'primes':>6} {'sec':>7}  exact")
    for (fn, scan, reorder), ref in REFERENCE.items():
        if only and fn not in only:
            continue
        order = BENCH_ORDERS[fn] if reorder else None
        rep = run_bench(fn, scan=scan, order=order, seed=args.seed, threads=args.threads)
        ratio = rep.probes / ref
        ok &= rep.verified
        print(f"{fn:4} {str(scan):5} {'custom' if reorder else 'default':8} {rep.probes:8d} {ref:8d} "
              f"{ratio:6.2f} {rep.primes:6d} {rep.wall_ms / 1000:7.1f}  {rep.verified}", flush=True)
        rows.append({"function": fn, "scan": scan, "reordered": reorder, "probes": rep.probes,
                     "reference": ref, "primes": rep.primes, "per_prime": rep.prime_probes,
                     "wall_ms": rep.wall_ms, "verified": rep.verified})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
