"""Run every acceptance experiment and print one PASS/FAIL line per check.

    python3 scripts/run_acceptance.py [--threads N] [--only NAME ...] [--csv PATH]
"""

import argparse
import csv
import sys
import time

from momentlyap import experiments


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=8)
    ap.add_argument("--only", nargs="*", choices=list(experiments.EXPERIMENTS))
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    rows, failed = [], 0
    for name in args.only or experiments.EXPERIMENTS:
        start = time.perf_counter()
        checks = experiments.run(name, threads=args.threads)
        for c in checks:
            print(c.line(), flush=True)
            rows.append((name, c.criterion, c.name, c.passed, c.detail))
            failed += not c.passed
        print(f"  ({name}: {time.perf_counter() - start:.1f}s)", flush=True)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("experiment", "criterion", "check", "passed", "detail"))
            w.writerows(rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
