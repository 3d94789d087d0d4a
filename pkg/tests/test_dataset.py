"""Grid enumeration, generation determinism, manifest round-trips."""

import json
from dataclasses import replace

import pytest

from closurebench.dataset import (
    EXP1_EDGE_LENGTHS,
    EXP1_THETA_GLOBAL,
    EXP1_THETA_LOCAL,
    EXP2_EDGE_LENGTHS,
    EXP2_THETA_GLOBAL,
    GenerationConfig,
    ManifestError,
    build_dataset,
    enumerate_exp1,
    enumerate_exp2,
    load_manifest,
    scene_for_spec,
    validate_manifest,
    write_manifest,
)
from closurebench.raster import contains_out_of_canvas

FAST = GenerationConfig(supersample_factor=1)


def group_counts(specs):
    counts = {}
    for s in specs:
        counts[s.group] = counts.get(s.group, 0) + 1
    return counts


@pytest.mark.parametrize("variant", ["triangles", "kanizsa"])
def test_exp1_group_counts(variant):
    specs = enumerate_exp1(variant, FAST)
    assert group_counts(specs) == {"complete": 32, "aligned": 192, "disordered": 768}
    assert len(specs) == 992


def test_exp1_complete_grid_product():
    specs = [s for s in enumerate_exp1("triangles", FAST) if s.group == "complete"]
    assert len(specs) == len(EXP1_THETA_GLOBAL) * 2 * 2  # 8 angles x 2 bg x 2 centers
    assert {s.theta_global for s in specs} == set(EXP1_THETA_GLOBAL)


@pytest.mark.parametrize("condition", ["lines", "kanizsa"])
def test_exp2_counts(condition):
    specs = enumerate_exp2(condition, FAST)
    assert len(specs) == 1152
    assert len({s.set_id for s in specs}) == 288
    assert len(EXP2_THETA_GLOBAL) * len(EXP2_EDGE_LENGTHS) * 2 * 2 == 288


def test_exp2_sets_share_covariates():
    specs = enumerate_exp2("lines", FAST)
    by_set = {}
    for s in specs:
        by_set.setdefault(s.set_id, []).append(s)
    for members in by_set.values():
        assert sorted(m.group for m in members) == [
            "base_a",
            "base_b",
            "composite_a",
            "composite_b",
        ]
        keys = {(m.theta_global, m.edge_length, m.background, m.center) for m in members}
        assert len(keys) == 1


def test_spec_tuples_and_paths_unique():
    for specs in (enumerate_exp1("triangles", FAST), enumerate_exp2("kanizsa", FAST)):
        assert len({s.key() for s in specs}) == len(specs)
        assert len({s.file_path for s in specs}) == len(specs)


def test_exp1_matching_partners_exist_uniquely():
    specs = enumerate_exp1("kanizsa", FAST)
    complete = {}
    aligned = {}
    for s in specs:
        if s.group == "complete":
            complete.setdefault((s.theta_global, s.background, s.center), []).append(s)
        elif s.group == "aligned":
            aligned.setdefault(
                (s.theta_global, s.background, s.center, s.edge_length), []
            ).append(s)
    assert all(len(v) == 1 for v in complete.values())
    assert all(len(v) == 1 for v in aligned.values())
    for s in specs:
        if s.group == "disordered":
            assert len(aligned[(s.theta_global, s.background, s.center, s.edge_length)]) == 1
            assert len(complete[(s.theta_global, s.background, s.center)]) == 1


def test_all_scenes_fit_canvas():
    for specs in (enumerate_exp1("triangles", FAST), enumerate_exp1("kanizsa", FAST),
                  enumerate_exp2("lines", FAST), enumerate_exp2("kanizsa", FAST)):
        for s in specs:
            assert not contains_out_of_canvas(scene_for_spec(s, FAST), FAST.canvas_size)


def test_kanizsa_radius_follows_edge_length():
    spec = [s for s in enumerate_exp1("kanizsa", FAST) if s.group == "aligned"][0]
    scene = scene_for_spec(spec, FAST)
    assert all(sh.radius == spec.edge_length for sh in scene.shapes)
    fixed = replace(FAST, pacman_radius=12.0)
    scene = scene_for_spec(spec, fixed)
    assert all(sh.radius == 12.0 for sh in scene.shapes)


def test_build_dataset_writes_everything(tmp_path):
    manifest = build_dataset("exp1_triangles", FAST, tmp_path)
    assert group_counts(manifest.specs) == {"complete": 32, "aligned": 192, "disordered": 768}
    # Loading with a root revalidates schema, counts, and file existence.
    loaded = load_manifest(tmp_path / "exp1_triangles" / "manifest.json", root=tmp_path)
    assert loaded.specs == manifest.specs
    assert loaded.config_hash == FAST.config_hash()


def test_build_dataset_is_deterministic(tmp_path):
    cfg = GenerationConfig(supersample_factor=2)
    m1 = build_dataset("exp2_lines", cfg, tmp_path / "run1")
    m2 = build_dataset("exp2_lines", cfg, tmp_path / "run2")
    p1 = tmp_path / "run1" / "exp2_lines" / "manifest.json"
    p2 = tmp_path / "run2" / "exp2_lines" / "manifest.json"
    assert p1.read_bytes() == p2.read_bytes()
    for s in m1.specs[:8] + m1.specs[-8:]:
        b1 = (tmp_path / "run1" / s.file_path).read_bytes()
        b2 = (tmp_path / "run2" / s.file_path).read_bytes()
        assert b1 == b2
    assert m1.specs == m2.specs


def test_manifest_round_trip(tmp_path):
    manifest = build_dataset("exp1_kanizsa", FAST, tmp_path)
    path = tmp_path / "copy.json"
    write_manifest(manifest, path)
    loaded = load_manifest(path)
    assert loaded.specs == manifest.specs
    assert loaded.dataset_id == manifest.dataset_id


def _mutate_manifest(path, out, fn):
    doc = json.loads(path.read_text())
    fn(doc)
    out.write_text(json.dumps(doc))
    return out


def test_manifest_rejects_duplicate_paths(tmp_path):
    manifest = build_dataset("exp1_triangles", FAST, tmp_path)
    src = tmp_path / "exp1_triangles" / "manifest.json"

    def dup(doc):
        doc["specs"][1]["file_path"] = doc["specs"][0]["file_path"]

    bad = _mutate_manifest(src, tmp_path / "bad.json", dup)
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(bad)


def test_manifest_rejects_off_grid_theta(tmp_path):
    build_dataset("exp1_triangles", FAST, tmp_path)
    src = tmp_path / "exp1_triangles" / "manifest.json"

    def tweak(doc):
        doc["specs"][0]["theta_global"] = 7.0

    bad = _mutate_manifest(src, tmp_path / "bad.json", tweak)
    with pytest.raises(ManifestError, match="off-grid"):
        load_manifest(bad)


def test_manifest_rejects_wrong_counts():
    specs = enumerate_exp1("triangles", FAST)
    from closurebench.dataset import Manifest

    broken = Manifest(
        dataset_id="exp1_triangles",
        generator_version="0",
        config_hash=FAST.config_hash(),
        config=FAST.as_dict(),
        specs=specs[:-1],
    )
    with pytest.raises(ManifestError, match="counts"):
        validate_manifest(broken)


def test_unknown_experiment_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown experiment"):
        build_dataset("exp3_dots", FAST, tmp_path)
