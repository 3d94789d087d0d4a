"""Pipeline stages: generate datasets, extract features, compute measures.

Stages are idempotent and resumable: generation and extraction are
skipped when their outputs already exist for the same content hash, so a
reporting change never forces feature recomputation. All outputs are
written in canonical order and are byte-stable across reruns.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    EXPERIMENTS,
    GenerationConfig,
    Manifest,
    ManifestError,
    build_dataset,
    load_manifest,
)
from .features import (
    FeatureStore,
    ModelMeta,
    PixelpoolBackend,
    TorchScriptBackend,
    extract,
)
from .measures import MeasureRecord, ce_records, closure_records
from .raster import load_png

RECORD_COLUMNS = (
    "model",
    "experiment",
    "variant",
    "theta_global",
    "theta_local",
    "edge_length",
    "background",
    "center_x",
    "center_y",
    "set_id",
    "measure",
    "value",
)

EXPERIMENT_ALIASES = {
    "1t": "exp1_triangles",
    "1k": "exp1_kanizsa",
    "2l": "exp2_lines",
    "2k": "exp2_kanizsa",
}


@dataclass
class RunConfig:
    """Everything one pipeline invocation needs."""

    out_root: str = "out"
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    backend: str = "pixelpool"  # "pixelpool" | "interchange"
    model_metas: tuple[str, ...] = ()
    grid_n: int = 16
    experiments: tuple[str, ...] = EXPERIMENTS
    aggregate_theta_local: bool = False
    annotations: str | None = None
    force: bool = False

    def dataset_root(self) -> str:
        return os.path.join(self.out_root, "datasets")

    def feature_root(self) -> str:
        return os.path.join(self.out_root, "features")

    def records_path(self) -> str:
        return os.path.join(self.out_root, "records.csv")


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage it happened in."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def resolve_models(cfg: RunConfig) -> list[tuple[ModelMeta, object]]:
    """(meta, backend) pairs for the configured backend."""
    if cfg.backend == "pixelpool":
        backend = PixelpoolBackend(grid_n=cfg.grid_n)
        return [(backend.meta(cfg.generation.canvas_size), backend)]
    if cfg.backend != "interchange":
        raise StageError("extract", f"unknown backend {cfg.backend!r}")
    if not cfg.model_metas:
        raise StageError("extract", "interchange backend needs --models meta paths")
    pairs = []
    for meta_path in cfg.model_metas:
        meta = ModelMeta.from_json(meta_path)
        if not meta.model_file:
            raise StageError("extract", f"{meta_path}: meta lacks a model_file entry")
        model_path = os.path.join(os.path.dirname(os.fspath(meta_path)), meta.model_file)
        pairs.append((meta, TorchScriptBackend(model_path)))
    return pairs


def _backend_signature(meta: ModelMeta, cfg: RunConfig) -> str:
    return f"{cfg.generation.config_hash()}:{meta.model_id}:{meta.tap_point}:{meta.input_size}"


def stage_gen(cfg: RunConfig) -> dict[str, Manifest]:
    """Generate all selected datasets (skipping ones already on disk)."""
    manifests = {}
    for experiment in cfg.experiments:
        mpath = os.path.join(cfg.dataset_root(), experiment, "manifest.json")
        if not cfg.force and os.path.isfile(mpath):
            try:
                m = load_manifest(mpath, root=cfg.dataset_root())
                if m.config_hash == cfg.generation.config_hash():
                    manifests[experiment] = m
                    continue
            except (ManifestError, OSError, json.JSONDecodeError):
                pass  # stale or broken: regenerate
        try:
            manifests[experiment] = build_dataset(experiment, cfg.generation, cfg.dataset_root())
        except ValueError as exc:
            raise StageError("gen", str(exc)) from exc
    return manifests


def stage_extract(cfg: RunConfig, manifests: dict[str, Manifest]) -> FeatureStore:
    """Compute and persist feature matrices per (dataset, model)."""
    store = FeatureStore(cfg.feature_root())
    try:
        pairs = resolve_models(cfg)
    except (OSError, ValueError, KeyError) as exc:
        raise StageError("extract", str(exc)) from exc
    for experiment, manifest in manifests.items():
        images = None
        for meta, backend in pairs:
            sig = _backend_signature(meta, cfg)
            if not cfg.force and store.has(experiment, meta.model_id, config_hash=sig):
                continue
            if images is None:
                images = [
                    (s.file_path, load_png(os.path.join(cfg.dataset_root(), s.file_path)))
                    for s in manifest.specs
                ]
            try:
                vecs = extract(images, meta, backend)
            except (ValueError, KeyError) as exc:
                raise StageError("extract", f"{experiment}/{meta.model_id}: {exc}") from exc
            matrix = np.stack([v.values for v in vecs])
            if meta.nonnegative and matrix.min() < 0:
                raise StageError(
                    "extract",
                    f"{experiment}/{meta.model_id}: meta claims nonnegative activations "
                    f"but min is {matrix.min()}",
                )
            store.save(experiment, meta.model_id, matrix, [v.image_id for v in vecs], sig)
    return store


def compute_records(cfg: RunConfig, manifests: dict[str, Manifest]) -> list[MeasureRecord]:
    """All measure records in canonical (dataset, model, manifest) order."""
    store = FeatureStore(cfg.feature_root())
    metas = [meta for meta, _ in resolve_models(cfg)]
    records: list[MeasureRecord] = []
    for experiment in cfg.experiments:
        manifest = manifests[experiment]
        for meta in metas:
            try:
                features = store.load_map(experiment, meta.model_id)
            except OSError as exc:
                raise StageError("measure", f"missing features: {exc}") from exc
            try:
                if experiment.startswith("exp1"):
                    records.extend(
                        closure_records(
                            manifest,
                            features,
                            meta.model_id,
                            aggregate_theta_local=cfg.aggregate_theta_local,
                        )
                    )
                else:
                    records.extend(ce_records(manifest, features, meta.model_id))
            except ValueError as exc:
                raise StageError("measure", f"{experiment}/{meta.model_id}: {exc}") from exc
    return records


def _center_label(center: tuple[float, float]) -> str:
    return f"{center[0]:g}x{center[1]:g}"


def record_to_row(rec: MeasureRecord) -> dict[str, str]:
    exp, variant = rec.experiment.split("_", 1)
    return {
        "model": rec.model_id,
        "experiment": exp,
        "variant": variant,
        "theta_global": f"{rec.theta_global:g}",
        "theta_local": "" if rec.theta_local is None else f"{rec.theta_local:g}",
        "edge_length": "" if rec.edge_length is None else f"{rec.edge_length:g}",
        "background": rec.background,
        "center_x": f"{rec.center[0]:g}",
        "center_y": f"{rec.center[1]:g}",
        "set_id": "" if rec.set_id is None else str(rec.set_id),
        "measure": rec.measure,
        "value": repr(rec.value),
    }


def write_records_csv(records: list[MeasureRecord], path) -> None:
    path = os.fspath(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RECORD_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(record_to_row(rec))
    os.replace(tmp, path)


def read_records_csv(path) -> list[dict]:
    """Rows with typed fields restored (floats, optional fields as None)."""
    rows = []
    with open(path, newline="") as f:
        for raw in csv.DictReader(f):
            rows.append(
                {
                    "model": raw["model"],
                    "dataset_id": f"{raw['experiment']}_{raw['variant']}",
                    "experiment": raw["experiment"],
                    "variant": raw["variant"],
                    "theta_global": float(raw["theta_global"]),
                    "theta_local": float(raw["theta_local"]) if raw["theta_local"] else None,
                    "edge_length": float(raw["edge_length"]) if raw["edge_length"] else None,
                    "background": raw["background"],
                    "center": f"{raw['center_x']}x{raw['center_y']}",
                    "set_id": int(raw["set_id"]) if raw["set_id"] else None,
                    "measure": raw["measure"],
                    "value": float(raw["value"]),
                }
            )
    return rows


def stage_measure(cfg: RunConfig, manifests: dict[str, Manifest]) -> str:
    records = compute_records(cfg, manifests)
    write_records_csv(records, cfg.records_path())
    return cfg.records_path()
