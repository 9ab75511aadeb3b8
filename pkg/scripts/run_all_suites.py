"""Run every check suite on every builtin scenario and print a verdict table."""

import argparse
import time

from magnomech.checks import run_checks
from magnomech.scenarios import builtin_names, load_builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--verbose", action="store_true", help="print every check line")
    args = ap.parse_args()
    any_fail = False
    for name in builtin_names():
        start = time.perf_counter()
        report = run_checks(load_builtin(name), "all", seed=args.seed)
        elapsed = time.perf_counter() - start
        if args.verbose:
            print("\n".join(report.lines()[:-1]))
        counts = ", ".join(f"{v} {k}" for k, v in report.counts.items() if v)
        print(f"{name:26s} {counts:55s} {elapsed:6.1f}s")
        any_fail |= report.failed
    return 1 if any_fail else 0


if __name__ == "__main__":
    raise SystemExit(main())
