#!/usr/bin/env python3
"""Run the Merkle scaling and end-to-end latency benchmarks."""

import argparse
import sys

from sbpp.harness import merkle_bench, protocol_latency_bench


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iters", type=int, default=1000, help="latency samples per path")
    ap.add_argument("--n-drops", type=int, default=1000)
    ap.add_argument("--out-dir", help="also write one CSV per benchmark here")
    args = ap.parse_args()

    for result in (
        merkle_bench(seed=args.seed),
        protocol_latency_bench(n_drops=args.n_drops, iters=args.iters, seed=args.seed),
    ):
        report = result.to_report()
        print(report.render())
        print()
        if args.out_dir:
            print(f"csv: {report.write_csv(args.out_dir)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
