#!/usr/bin/env python3
"""Run the asymmetric-design consistency study.

Thin wrapper over `svyanova simulate` with the bundled study-2 grid
(2 cluster designs x 5 unit designs x 3 within-cluster sizes = 30
scenarios).  Use --desk for the reduced-scale run; --diagnose also
writes the balance/informativeness/bounds reports per scenario.
"""

import argparse
import sys
from importlib import resources

from svyanova.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--desk", action="store_true",
                        help="reduced-scale run (M=1000, m=100, R=20)")
    parser.add_argument("--out", default="results/study2")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--diagnose", action="store_true",
                        help="also run the design diagnostics per scenario")
    args = parser.parse_args()

    cfg = resources.files("svyanova") / "scenarios" / "paper-study2.cfg"
    common = ["--scenario", str(cfg), "--out", args.out]
    if args.desk:
        common.append("--desk")
    if args.seed is not None:
        common += ["--seed", str(args.seed)]
    code = cli_main(["simulate", *common, "--workers", str(args.workers)])
    if code == 0 and args.diagnose:
        code = cli_main(["diagnose", *common])
    return code


if __name__ == "__main__":
    sys.exit(main())
