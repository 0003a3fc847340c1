#!/usr/bin/env python3
"""Run every verification suite and exit nonzero on any failing property."""

import argparse

from adacgd.verification import SUITES, run_suite


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=2000)
    args = parser.parse_args()

    failures = 0
    for suite in sorted(SUITES):
        print(f"== suite: {suite}")
        for result in run_suite(suite, seed=args.seed, trials=args.trials):
            print(result.line())
            failures += 0 if result.passed else 1
    print(f"{failures} failing properties" if failures else "all properties passed")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
