"""Run the Monte Carlo property checks over a grid of (tau, lambda, lengths) settings."""

import argparse

from rbp.verification import run_checks


GRID = [
    (1.0, 2.0, (1.0, 1.0)),
    (2.0, 2.0, (1.0, 1.0)),
    (2.0, 8.0, (1.0, 0.5)),
    (0.5, 0.5, (3.0,)),
    (1.0, 1.0, (1.0, 2.0)),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=None)
    ap.add_argument("--geweke", action="store_true", help="also run both kernel correctness tests")
    args = ap.parse_args()

    failed = 0
    for i, (tau, lam, lengths) in enumerate(GRID):
        for r in run_checks(["volume", "coverage"], args.seed + i, n_samples=args.samples,
                            tau=tau, lam=lam, lengths=lengths):
            failed += not r.passed
            print(r.to_json())
    names = ["self-consistency"] + (["geweke-regression", "geweke-relational"] if args.geweke else [])
    for r in run_checks(names, args.seed, n_samples=args.samples):
        failed += not r.passed
        print(r.to_json())
    print(f"{failed} check(s) failed")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
