#!/usr/bin/env python3
"""Run the evaluation experiments: re-association, audit replay,
atomicity/isolation, malicious server, and search quality."""

import argparse
import sys

from sbpp.harness import (
    atomicity_and_isolation_suite,
    audit_replay_experiment,
    malicious_server_suite,
    reassociation_experiment,
    search_quality_experiment,
)

RUNNERS = {
    "reassoc": lambda seed: reassociation_experiment(seed=seed),
    "audit-replay": lambda seed: audit_replay_experiment(seed=seed),
    "atomicity": lambda seed: atomicity_and_isolation_suite(seed=seed),
    "malicious-server": lambda seed: malicious_server_suite(seed=seed),
    "search-quality": lambda seed: search_quality_experiment(seed=seed),
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "which",
        nargs="*",
        choices=[*RUNNERS, "all"],
        default=["all"],
        help="experiments to run (default: all)",
    )
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", help="also write one CSV per experiment here")
    args = ap.parse_args()

    names = list(RUNNERS) if "all" in args.which else args.which
    for name in names:
        report = RUNNERS[name](args.seed).to_report()
        print(report.render())
        print()
        if args.out_dir:
            print(f"csv: {report.write_csv(args.out_dir)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
