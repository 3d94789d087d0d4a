#!/usr/bin/env python3
"""Full benchmark run on the model-free pixelpool backend.

Generates all four stimulus datasets, extracts grid-pooled features,
computes both measures, runs the statistics, and writes figures plus the
summary table. Everything lands under --out (default ./out_pixelpool).
"""

import argparse
import sys

from closurebench.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out_pixelpool")
    parser.add_argument("--grid-n", type=int, default=16)
    parser.add_argument("--supersample", type=int, default=4)
    args = parser.parse_args()
    rc = cli_main(
        [
            "all",
            "--backend", "pixelpool",
            "--out", args.out,
            "--grid-n", str(args.grid_n),
            "--supersample", str(args.supersample),
        ]
    )
    if rc == 0:
        print(f"done: see {args.out}/summary.md and {args.out}/figures/")
    return rc


if __name__ == "__main__":
    sys.exit(main())
