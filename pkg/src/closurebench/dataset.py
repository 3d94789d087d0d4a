"""Experiment parameter grids, image generation, and the dataset manifest.

Four dataset ids are built from fixed grids:

* ``exp1_triangles`` / ``exp1_kanizsa``: 32 complete + 192 aligned + 768
  disordered images (992 total per variant).
* ``exp2_lines`` / ``exp2_kanizsa``: 288 sets of four images each
  (base_a, base_b, composite_a, composite_b), 1152 per condition.

Generation is deterministic: the same config produces byte-identical
manifests and images.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

from . import __version__
from .geometry import (
    SQUARE_SIDE,
    TRIANGLE_SIDE,
    Point,
    SquareSpec,
    TriangleSpec,
    complete_triangle_scene,
    kanizsa_triangle_scene,
    square_set_scenes,
    triangle_fragment_scene,
)
from .raster import contains_out_of_canvas, render, save_png

EXPERIMENTS = ("exp1_triangles", "exp1_kanizsa", "exp2_lines", "exp2_kanizsa")

EXP1_GROUPS = ("complete", "aligned", "disordered")
EXP2_GROUPS = ("base_a", "base_b", "composite_a", "composite_b")

EXP1_THETA_GLOBAL = tuple(float(t) for t in range(0, 120, 15))
EXP1_EDGE_LENGTHS = (3.0, 8.0, 13.0, 18.0, 24.0, 29.0)
EXP1_THETA_LOCAL = (72.0, 144.0, 216.0, 288.0)

EXP2_THETA_GLOBAL = tuple(i * 11.25 for i in range(8))
EXP2_EDGE_LENGTHS = (5.0, 10.0, 14.0, 19.0, 24.0, 29.0, 33.0, 38.0, 43.0)

BACKGROUNDS = ("white", "black")
DEFAULT_CENTERS = ((150.0, 150.0), (134.0, 134.0))

EXP1_GROUP_COUNTS = {"complete": 32, "aligned": 192, "disordered": 768}
EXP2_SET_COUNT = 288


class ManifestError(ValueError):
    """Raised when a manifest violates its schema or invariants."""


@dataclass(frozen=True)
class GenerationConfig:
    """All knobs that affect generated pixels.

    pacman_radius=None ties the disk radius of incomplete-disk stimuli to
    the edge-length grid (visible mouth edges have length = radius); a
    fixed value decouples the two, as a sensitivity toggle.
    """

    canvas_size: int = 300
    stroke_width: float = 2.0
    supersample_factor: int = 4
    pacman_radius: float | None = None
    centers: tuple[Point, ...] = DEFAULT_CENTERS

    def as_dict(self) -> dict:
        d = asdict(self)
        d["centers"] = [list(c) for c in self.centers]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @staticmethod
    def from_dict(d: dict) -> "GenerationConfig":
        d = dict(d)
        if "centers" in d:
            d["centers"] = tuple(tuple(float(x) for x in c) for c in d["centers"])
        return GenerationConfig(**d)


@dataclass(frozen=True)
class StimulusSpec:
    """Full parameter tuple for one generated image."""

    experiment: str
    group: str
    theta_global: float
    background: str
    center: Point
    theta_local: float | None = None
    edge_length: float | None = None
    set_id: int | None = None
    file_path: str = ""

    def key(self) -> tuple:
        return (
            self.experiment,
            self.group,
            self.theta_global,
            self.theta_local,
            self.edge_length,
            self.background,
            self.center,
            self.set_id,
        )


@dataclass
class Manifest:
    dataset_id: str
    generator_version: str
    config_hash: str
    config: dict
    specs: list[StimulusSpec] = field(default_factory=list)


def _fmt_num(x: float) -> str:
    s = f"{x:g}"
    return s.replace(".", "p")


def _file_name(spec: StimulusSpec) -> str:
    parts = [f"tg{_fmt_num(spec.theta_global)}"]
    if spec.theta_local is not None:
        parts.append(f"tl{_fmt_num(spec.theta_local)}")
    if spec.edge_length is not None:
        parts.append(f"e{_fmt_num(spec.edge_length)}")
    parts.append(f"bg{spec.background}")
    cx, cy = spec.center
    parts.append(f"c{_fmt_num(cx)}x{_fmt_num(cy)}")
    return "_".join(parts) + ".png"


def enumerate_exp1(variant: str, config: GenerationConfig) -> list[StimulusSpec]:
    """Grid for a first-experiment variant ("triangles" or "kanizsa")."""
    if variant not in ("triangles", "kanizsa"):
        raise ValueError(f"unknown exp1 variant {variant!r}")
    experiment = f"exp1_{variant}"
    specs = []
    for tg in EXP1_THETA_GLOBAL:
        for bg in BACKGROUNDS:
            for center in config.centers:
                specs.append(
                    StimulusSpec(
                        experiment=experiment,
                        group="complete",
                        theta_global=tg,
                        background=bg,
                        center=center,
                    )
                )
    for tg in EXP1_THETA_GLOBAL:
        for bg in BACKGROUNDS:
            for center in config.centers:
                for e in EXP1_EDGE_LENGTHS:
                    specs.append(
                        StimulusSpec(
                            experiment=experiment,
                            group="aligned",
                            theta_global=tg,
                            background=bg,
                            center=center,
                            edge_length=e,
                        )
                    )
    for tg in EXP1_THETA_GLOBAL:
        for bg in BACKGROUNDS:
            for center in config.centers:
                for e in EXP1_EDGE_LENGTHS:
                    for tl in EXP1_THETA_LOCAL:
                        specs.append(
                            StimulusSpec(
                                experiment=experiment,
                                group="disordered",
                                theta_global=tg,
                                background=bg,
                                center=center,
                                edge_length=e,
                                theta_local=tl,
                            )
                        )
    return _with_paths(specs)


def enumerate_exp2(condition: str, config: GenerationConfig) -> list[StimulusSpec]:
    """Grid for a second-experiment condition ("lines" or "kanizsa")."""
    if condition not in ("lines", "kanizsa"):
        raise ValueError(f"unknown exp2 condition {condition!r}")
    experiment = f"exp2_{condition}"
    specs = []
    set_id = 0
    for tg in EXP2_THETA_GLOBAL:
        for e in EXP2_EDGE_LENGTHS:
            for bg in BACKGROUNDS:
                for center in config.centers:
                    for group in EXP2_GROUPS:
                        specs.append(
                            StimulusSpec(
                                experiment=experiment,
                                group=group,
                                theta_global=tg,
                                background=bg,
                                center=center,
                                edge_length=e,
                                set_id=set_id,
                            )
                        )
                    set_id += 1
    return _with_paths(specs)


def _with_paths(specs: list[StimulusSpec]) -> list[StimulusSpec]:
    from dataclasses import replace

    out = []
    for s in specs:
        rel = os.path.join(s.experiment, s.group, _file_name(s))
        out.append(replace(s, file_path=rel))
    return out


def _pacman_radius(spec: StimulusSpec, config: GenerationConfig) -> float:
    if config.pacman_radius is not None:
        return config.pacman_radius
    return float(spec.edge_length)


def scene_for_spec(spec: StimulusSpec, config: GenerationConfig):
    """Build the scene graph for one stimulus spec."""
    sw, bg = config.stroke_width, spec.background
    if spec.experiment.startswith("exp1"):
        tri = TriangleSpec(center=spec.center, theta_global=spec.theta_global, side=TRIANGLE_SIDE)
        if spec.group == "complete":
            return complete_triangle_scene(tri, stroke_width=sw, background=bg)
        theta_local = spec.theta_local if spec.group == "disordered" else 0.0
        if spec.experiment == "exp1_triangles":
            return triangle_fragment_scene(
                tri, spec.edge_length, theta_local, stroke_width=sw, background=bg
            )
        return kanizsa_triangle_scene(
            tri, _pacman_radius(spec, config), theta_local, stroke_width=sw, background=bg
        )
    sq = SquareSpec(center=spec.center, theta_global=spec.theta_global, side=SQUARE_SIDE)
    condition = spec.experiment.split("_", 1)[1]
    edge = spec.edge_length if condition == "lines" else _pacman_radius(spec, config)
    scenes = square_set_scenes(sq, edge, condition, stroke_width=sw, background=bg)
    return scenes[spec.group]


def build_dataset(experiment: str, config: GenerationConfig, out_root) -> Manifest:
    """Enumerate, render and write one dataset; returns its manifest.

    Aborts without writing a manifest if any spec's geometry would leave
    the canvas.
    """
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    if experiment.startswith("exp1"):
        specs = enumerate_exp1(experiment.split("_", 1)[1], config)
    else:
        specs = enumerate_exp2(experiment.split("_", 1)[1], config)

    scenes = []
    for spec in specs:
        scene = scene_for_spec(spec, config)
        if contains_out_of_canvas(scene, config.canvas_size):
            raise ValueError(
                f"out-of-canvas geometry for parameter tuple {spec.key()!r}"
            )
        scenes.append(scene)

    out_root = os.fspath(out_root)
    for spec, scene in zip(specs, scenes):
        img = render(scene, config.canvas_size, config.supersample_factor)
        path = os.path.join(out_root, spec.file_path)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        save_png(img, path)

    manifest = Manifest(
        dataset_id=experiment,
        generator_version=__version__,
        config_hash=config.config_hash(),
        config=config.as_dict(),
        specs=specs,
    )
    write_manifest(manifest, os.path.join(out_root, experiment, "manifest.json"))
    return manifest


# ---------------------------------------------------------------------------
# Manifest serialization and validation


def _spec_to_json(s: StimulusSpec) -> dict:
    return {
        "experiment": s.experiment,
        "group": s.group,
        "theta_global": s.theta_global,
        "theta_local": s.theta_local,
        "edge_length": s.edge_length,
        "background": s.background,
        "center": list(s.center),
        "set_id": s.set_id,
        "file_path": s.file_path,
    }


def write_manifest(manifest: Manifest, path) -> None:
    doc = {
        "dataset_id": manifest.dataset_id,
        "generator_version": manifest.generator_version,
        "config_hash": manifest.config_hash,
        "config": manifest.config,
        "specs": [_spec_to_json(s) for s in manifest.specs],
    }
    path = os.fspath(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def _check(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ManifestError(f"{where}: {msg}")


def _validate_spec(i: int, s: StimulusSpec) -> None:
    at = f"specs[{i}]"
    _check(s.experiment in EXPERIMENTS, f"{at}.experiment", f"unknown experiment {s.experiment!r}")
    _check(s.background in BACKGROUNDS, f"{at}.background", f"unknown background {s.background!r}")
    if s.experiment.startswith("exp1"):
        _check(s.group in EXP1_GROUPS, f"{at}.group", f"unknown group {s.group!r}")
        _check(
            s.theta_global in EXP1_THETA_GLOBAL,
            f"{at}.theta_global",
            f"off-grid parameter {s.theta_global!r}",
        )
        if s.group == "complete":
            _check(s.edge_length is None, f"{at}.edge_length", "must be absent for complete")
            _check(s.theta_local is None, f"{at}.theta_local", "must be absent for complete")
        else:
            _check(
                s.edge_length in EXP1_EDGE_LENGTHS,
                f"{at}.edge_length",
                f"off-grid parameter {s.edge_length!r}",
            )
        if s.group == "disordered":
            _check(
                s.theta_local in EXP1_THETA_LOCAL,
                f"{at}.theta_local",
                f"off-grid parameter {s.theta_local!r}",
            )
        else:
            _check(s.theta_local is None, f"{at}.theta_local", "present outside disordered group")
        _check(s.set_id is None, f"{at}.set_id", "set_id applies to exp2 only")
    else:
        _check(s.group in EXP2_GROUPS, f"{at}.group", f"unknown group {s.group!r}")
        _check(
            s.theta_global in EXP2_THETA_GLOBAL,
            f"{at}.theta_global",
            f"off-grid parameter {s.theta_global!r}",
        )
        _check(
            s.edge_length in EXP2_EDGE_LENGTHS,
            f"{at}.edge_length",
            f"off-grid parameter {s.edge_length!r}",
        )
        _check(s.theta_local is None, f"{at}.theta_local", "exp2 images carry no theta_local")
        _check(
            isinstance(s.set_id, int) and 0 <= s.set_id < EXP2_SET_COUNT,
            f"{at}.set_id",
            f"set_id {s.set_id!r} outside 0..{EXP2_SET_COUNT - 1}",
        )


def validate_manifest(manifest: Manifest, root=None) -> None:
    """Check schema, grid membership, counts, uniqueness and optionally files."""
    seen_paths: set[str] = set()
    seen_keys: set[tuple] = set()
    for i, s in enumerate(manifest.specs):
        _validate_spec(i, s)
        _check(
            s.experiment == manifest.dataset_id,
            f"specs[{i}].experiment",
            f"{s.experiment!r} does not match dataset {manifest.dataset_id!r}",
        )
        _check(bool(s.file_path), f"specs[{i}].file_path", "missing")
        _check(
            s.file_path not in seen_paths, f"specs[{i}].file_path", f"duplicate {s.file_path!r}"
        )
        seen_paths.add(s.file_path)
        _check(s.key() not in seen_keys, f"specs[{i}]", "duplicate parameter tuple")
        seen_keys.add(s.key())

    counts: dict[str, int] = {}
    for s in manifest.specs:
        counts[s.group] = counts.get(s.group, 0) + 1
    if manifest.dataset_id.startswith("exp1"):
        _check(
            counts == EXP1_GROUP_COUNTS,
            "specs",
            f"group counts {counts} != contract {EXP1_GROUP_COUNTS}",
        )
    else:
        expected = {g: EXP2_SET_COUNT for g in EXP2_GROUPS}
        _check(counts == expected, "specs", f"group counts {counts} != contract {expected}")

    if root is not None:
        for i, s in enumerate(manifest.specs):
            p = os.path.join(os.fspath(root), s.file_path)
            _check(os.path.isfile(p), f"specs[{i}].file_path", f"file missing: {s.file_path}")


def load_manifest(path, root=None) -> Manifest:
    """Read and validate a manifest; `root` additionally checks files exist."""
    with open(path) as f:
        doc = json.load(f)
    for key in ("dataset_id", "generator_version", "config_hash", "config", "specs"):
        _check(key in doc, key, "missing field")
    specs = []
    for i, d in enumerate(doc["specs"]):
        try:
            specs.append(
                StimulusSpec(
                    experiment=d["experiment"],
                    group=d["group"],
                    theta_global=float(d["theta_global"]),
                    theta_local=None if d.get("theta_local") is None else float(d["theta_local"]),
                    edge_length=None if d.get("edge_length") is None else float(d["edge_length"]),
                    background=d["background"],
                    center=tuple(float(x) for x in d["center"]),
                    set_id=d.get("set_id"),
                    file_path=d.get("file_path", ""),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"specs[{i}]: malformed entry ({exc})") from exc
    manifest = Manifest(
        dataset_id=doc["dataset_id"],
        generator_version=doc["generator_version"],
        config_hash=doc["config_hash"],
        config=doc["config"],
        specs=specs,
    )
    validate_manifest(manifest, root=root)
    return manifest
