#!/usr/bin/env python3
"""Full benchmark run over exported classifier models.

Expects a directory of exports produced by the model_export package:
one <model_id>.meta.json plus its interchange .pt file per model. Runs
the interchange backend over every meta found and attaches the static
annotation column to the summary.
"""

import argparse
import glob
import os
import sys

from closurebench.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("models_dir", help="directory containing *.meta.json exports")
    parser.add_argument("--out", default="out_models")
    parser.add_argument(
        "--annotations",
        default=os.path.join(os.path.dirname(__file__), "..", "data", "annotations.json"),
    )
    args = parser.parse_args()

    metas = sorted(glob.glob(os.path.join(args.models_dir, "*.meta.json")))
    if not metas:
        print(f"no *.meta.json files under {args.models_dir}", file=sys.stderr)
        return 2
    print(f"running {len(metas)} models: {[os.path.basename(m) for m in metas]}")
    rc = cli_main(
        [
            "all",
            "--backend", "interchange",
            "--models", *metas,
            "--out", args.out,
            "--annotations", args.annotations,
        ]
    )
    if rc == 0:
        print(f"done: see {args.out}/summary.md and {args.out}/figures/")
    return rc


if __name__ == "__main__":
    sys.exit(main())
