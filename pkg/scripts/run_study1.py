#!/usr/bin/env python3
"""Run the strongly-informative symmetric-design replication study.

Thin wrapper over `svyanova simulate` with the bundled study-1 grid
(three population sizes, double/single/equal weighting plus the
integrated-likelihood routes).  Use --desk for the reduced-scale run.
"""

import argparse
import sys
from importlib import resources

from svyanova.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--desk", action="store_true", help="reduced-scale run (R=20)")
    parser.add_argument("--out", default="results/study1")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    cfg = resources.files("svyanova") / "scenarios" / "paper-study1.cfg"
    argv = ["simulate", "--scenario", str(cfg), "--out", args.out,
            "--workers", str(args.workers)]
    if args.desk:
        argv.append("--desk")
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
