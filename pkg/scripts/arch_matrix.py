"""Verdict of every corpus litmus test under every architecture and storage.

    python3 scripts/arch_matrix.py [--filter TEXT] [--max-states N]

Columns run from strongest to weakest model; once a test's weak outcome
is ALLOWED it should stay ALLOWED to the right.  Tests using lwfence have
no meaning on the other models and print '-' there.
"""

import argparse

from memro import Bounds, builtin_corpus, check_condition, explore, get_arch

COLUMNS = [("sc", "map"), ("tso", "map"), ("arm", "map"), ("power", "map"), ("power", "writelist")]


def cell(tc, arch, storage, bounds):
    try:
        ex = explore(get_arch(arch), tc.system(), storage, bounds)
    except ValueError:
        return "-"
    v = check_condition(ex, tc.quantifier, tc.cond)
    return v.kind + ("*" if ex.truncated else "")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--filter", default="")
    ap.add_argument("--max-states", type=int, default=1_000_000)
    args = ap.parse_args()
    bounds = Bounds(max_states=args.max_states)

    head = f"{'test':28}" + "".join(f"{a + '/' + s:>17}" for a, s in COLUMNS)
    print(head)
    print("-" * len(head))
    for e in builtin_corpus():
        if e.kind != "test" or args.filter not in e.name:
            continue
        row = [cell(e.item, a, s, bounds) for a, s in COLUMNS]
        print(f"{e.name:28}" + "".join(f"{c:>17}" for c in row))
    print("* exploration hit the loop bound")


if __name__ == "__main__":
    main()
