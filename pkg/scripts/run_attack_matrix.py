#!/usr/bin/env python3
"""Run the full attack-by-variant matrix and print the grid.

Exits 0 when the observed matrix equals the expected one, 1 otherwise,
so this doubles as a quick regression check.
"""

import argparse
import sys

from sbpp.harness import run_attack_matrix


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument(
        "--impoverished-token",
        action="store_true",
        help="strip the result-set root from the V8 token (expect A4b to open up)",
    )
    args = ap.parse_args()
    matrix = run_attack_matrix(
        trials=args.trials,
        seed=args.seed,
        token_includes_root=not args.impoverished_token,
    )
    print(matrix.render())
    if args.impoverished_token:
        return 0
    return 0 if matrix.matches_expected() else 1


if __name__ == "__main__":
    sys.exit(main())
