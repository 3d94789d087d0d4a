"""CLI: export one or all supported models.

    model-export export --model vgg16 --out exports/
    model-export export --all --out exports/ [--untrained] [--no-verify]
    model-export list
"""

from __future__ import annotations

import argparse
import sys

from .registry import MODEL_REGISTRY, ExportRequest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export models with their tap points")
    p.add_argument("--model", help="model id (see `model-export list`)")
    p.add_argument("--all", action="store_true", help="export every supported model")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--untrained", action="store_true",
        help="export with randomly initialized weights (no download needed)",
    )
    p.add_argument("--no-verify", action="store_true", help="skip the parity check")
    sub.add_parser("list", help="list supported model ids")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for model_id, entry in MODEL_REGISTRY.items():
            print(f"{model_id:18s} tap_role={entry.tap_role!r} input={entry.input_size}")
        return 0

    if not args.all and not args.model:
        print("error: give --model <id> or --all", file=sys.stderr)
        return 2
    from .export import export_model  # deferred: imports torch

    model_ids = sorted(MODEL_REGISTRY) if args.all else [args.model]
    failed = []
    for model_id in model_ids:
        req = ExportRequest(
            model_id=model_id,
            out_dir=args.out,
            pretrained=not args.untrained,
            verify=not args.no_verify,
        )
        try:
            meta = export_model(req)
        except Exception as exc:
            print(f"error [{model_id}] {type(exc).__name__}: {exc}", file=sys.stderr)
            failed.append(model_id)
            continue
        parity = meta.get("parity_max_relative_deviation")
        parity_note = f", parity {parity:.2e}" if parity is not None else ""
        print(f"exported {model_id}: tap {meta['tap_point']!r}{parity_note}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
