"""Optimized upper and lower bounds against the spectral exponent for the pitchfork.

Prints a table over p and the p^1.5 scaled gap, which should shrink.

    python3 scripts/sandwich_sweep.py [--a 0] [--p 1 3 10 30 100]
"""

import argparse

import numpy as np

from momentlyap import bounds, build_model, spectral
from momentlyap.spectral import GridSpec


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--a", type=float, default=0.0)
    ap.add_argument("--p", type=float, nargs="*", default=[1.0, 3.0, 10.0, 30.0, 100.0])
    ap.add_argument("--no-spectral", action="store_true", help="skip the eigenvalue solve")
    args = ap.parse_args(argv)
    model = build_model({"model": "pitchfork_q2", "a": args.a, "b": 1.0, "sigma": 1.0})
    print(f"{'p':>8} {'lower':>12} {'spectral':>12} {'upper':>12} {'gap/p^1.5':>10}")
    for p in args.p:
        up, weight = bounds.upper_bound(model, p)
        lo, _ = bounds.lower_bound(model, p)
        lam = float("nan")
        if not args.no_spectral:
            # the eigenfunction concentrates on |x| ~ p^(1/4)
            x_max = max(8.0, 4.0 * p ** 0.25)
            lam = spectral.solve(model, p, GridSpec.interval(x_max, 1600), weight).lam
        print(f"{p:8.3g} {lo:12.6g} {lam:12.6g} {up:12.6g} "
              f"{(up - lo) / p ** 1.5:10.3e}")


if __name__ == "__main__":
    main()
