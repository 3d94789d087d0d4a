"""Command-line entry point.

Subcommands mirror the pipeline stages::

    closurebench gen      --out out                 # render datasets
    closurebench extract  --out out --backend pixelpool
    closurebench measure  --out out
    closurebench analyze  --out out
    closurebench report   --out out
    closurebench all      --out out                 # everything above

Generation and extraction are content-hashed and skipped when already
done; a reporting change never recomputes features.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .dataset import EXPERIMENTS, GenerationConfig
from .pipeline import (
    EXPERIMENT_ALIASES,
    RunConfig,
    StageError,
    stage_extract,
    stage_gen,
    stage_measure,
)
from .report import stage_analyze, stage_report

_STAGES = ("gen", "extract", "measure", "analyze", "report", "all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="closurebench",
        description="Closure-effect benchmark for convolutional image classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run all stages")
        p.add_argument("--config", help="JSON config file (generation settings, grid_n, annotations)")
        p.add_argument("--models", nargs="*", default=None, help="model_meta.json paths (interchange backend)")
        p.add_argument(
            "--backend", choices=("pixelpool", "interchange"), default=None,
            help="feature backend (default pixelpool)",
        )
        p.add_argument("--out", default=None, help="output root directory (default ./out)")
        p.add_argument(
            "--experiment", choices=("all", "1t", "1k", "2l", "2k"), default=None,
            help="dataset selection (default all)",
        )
        p.add_argument(
            "--aggregate-theta-local", action="store_true",
            help="average disordered similarities across theta_local before differencing",
        )
        p.add_argument("--grid-n", type=int, default=None, help="pixelpool grid size (default 16)")
        p.add_argument("--annotations", default=None, help="static annotation JSON for the summary table")
        p.add_argument("--force", action="store_true", help="redo generation/extraction even if cached")
        p.add_argument("--supersample", type=int, default=None, help="override supersample factor")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_cfg: dict = {}
    if args.config:
        with open(args.config) as f:
            file_cfg = json.load(f)

    gen_dict = dict(file_cfg.get("generation", {}))
    if args.supersample is not None:
        gen_dict["supersample_factor"] = args.supersample
    generation = GenerationConfig.from_dict(gen_dict) if gen_dict else GenerationConfig()

    if args.experiment in (None, "all"):
        experiments = tuple(EXPERIMENTS)
    else:
        experiments = (EXPERIMENT_ALIASES[args.experiment],)

    return RunConfig(
        out_root=args.out or file_cfg.get("out", "out"),
        generation=generation,
        backend=args.backend or file_cfg.get("backend", "pixelpool"),
        model_metas=tuple(args.models if args.models is not None else file_cfg.get("models", ())),
        grid_n=args.grid_n if args.grid_n is not None else int(file_cfg.get("grid_n", 16)),
        experiments=experiments,
        aggregate_theta_local=bool(args.aggregate_theta_local),
        annotations=args.annotations or file_cfg.get("annotations"),
        force=bool(args.force),
    )


def validate_config(command: str, cfg: RunConfig) -> None:
    """Fail fast on broken references before any expensive stage runs."""
    if cfg.backend not in ("pixelpool", "interchange"):
        raise StageError("extract", f"unknown backend {cfg.backend!r}")
    if command in ("extract", "measure", "all") and cfg.backend == "interchange":
        if not cfg.model_metas:
            raise StageError("extract", "interchange backend needs --models meta paths")
        for p in cfg.model_metas:
            if not os.path.isfile(p):
                raise StageError("extract", f"model meta not found: {p}")
    if cfg.annotations and not os.path.isfile(cfg.annotations):
        raise StageError("report", f"annotations file not found: {cfg.annotations}")


def run_command(command: str, cfg: RunConfig) -> None:
    validate_config(command, cfg)
    need_manifests = command in ("gen", "extract", "measure", "all")
    manifests = stage_gen(cfg) if need_manifests else None
    if command in ("extract", "all"):
        stage_extract(cfg, manifests)
    if command in ("measure", "all"):
        stage_measure(cfg, manifests)
    if command in ("analyze", "all"):
        stage_analyze(cfg)
    if command in ("report", "all"):
        stage_report(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error [config] {exc}", file=sys.stderr)
        return 2
    try:
        run_command(args.command, cfg)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything unexpected still names the command
        print(f"error [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
