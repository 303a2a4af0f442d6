"""Check each Chase-Lev variant against the sequential deque for many clients.

    python3 scripts/chase_lev_sweep.py [--procs 3] [--ops 2] [--variant NAME ...]

A client assigns a sequence of operations to each process: the owner gets
put/take, every other process steals.  One line per (variant, client) that
fails to refine, then a summary table.
"""

import argparse
import time

from memro import Bounds, check_refinement, deque_job
from memro.refinement import DEQUE_VARIANTS, deque_clients


def describe(clients):
    return " | ".join(",".join(ops) for ops in clients)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--procs", type=int, default=3)
    ap.add_argument("--ops", type=int, default=2)
    ap.add_argument("--loop-bound", type=int, default=2)
    ap.add_argument("--variant", action="append", choices=DEQUE_VARIANTS)
    args = ap.parse_args()
    variants = args.variant or list(DEQUE_VARIANTS)
    clients = list(deque_clients(args.procs, args.ops))

    summary = []
    for variant in variants:
        t0 = time.perf_counter()
        counts = {}
        for c in clients:
            v = check_refinement(deque_job(c, variant), Bounds(loop=args.loop_bound))
            counts[v.kind] = counts.get(v.kind, 0) + 1
            if v.kind == "VIOLATES":
                shown = ", ".join(map(str, v.matching[:3]))
                more = f" (+{len(v.matching) - 3} more)" if len(v.matching) > 3 else ""
                print(f"{variant:16} {describe(c):32} VIOLATES  {shown}{more}")
        summary.append((variant, counts, time.perf_counter() - t0))

    print()
    print(f"{len(clients)} clients, loop bound {args.loop_bound}")
    for variant, counts, took in summary:
        parts = ", ".join(f"{k} {n}" for k, n in sorted(counts.items()))
        print(f"  {variant:16} {parts}  ({took:.0f}s)")


if __name__ == "__main__":
    main()
