"""Acceptance suite: structural and statistical contracts on the
pixelpool backend and synthetic vectors.

Each criterion prints one ``ACCEPTANCE PASS/FAIL`` line (visible with
``pytest -s`` or on failure). Criteria:

1. dataset contracts: exact group counts and generation runtime
2. geometry: analytic and raster-measured vertex distances, fragment
   alignment, mouth aim, removal-fraction spot values
3. measure oracles: brute-force agreement, CE range and antisymmetry
4. statistics oracles: normal equations, residual orthogonality,
   closed-form t checks
5. determinism: two full pipeline runs are byte-identical and fast

Tolerances are fixed here; "1e-9 relative" comparisons use
|a-b| <= 1e-9 * max(1, |a|, |b|) so that measure differences that sit
near zero (legitimate cancellation of two O(1) similarities) do not
demand sub-epsilon agreement.
"""

import functools
import json
import math
import os
import time

import numpy as np
import pytest

from closurebench.dataset import GenerationConfig, load_manifest
from closurebench.features import FeatureStore
from closurebench.geometry import (
    TriangleSpec,
    complete_triangle_scene,
    kanizsa_pacmen,
    removal_fraction,
    triangle_fragments,
    fragment_polyline,
    triangle_vertices,
)
from closurebench.measures import (
    configural_effect,
    cosine_similarity,
    pair_exp1,
    pair_exp2,
)
from closurebench.pipeline import RunConfig, read_records_csv
from closurebench.raster import render
from closurebench.stats import one_sample_ttest, student_t_sf
from closurebench.cli import run_command

GEN_TIME_LIMIT_S = 120.0
PIPELINE_TIME_LIMIT_S = 300.0
REL_TOL = 1e-9


def close_rel(a: float, b: float, tol: float = REL_TOL) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE FAIL - {name}")
                raise
            print(f"ACCEPTANCE PASS - {name}")

        return wrapper

    return deco


# ---------------------------------------------------------------------------
# shared full pipeline runs (pixelpool backend, supersample 4)


@pytest.fixture(scope="session")
def pipeline_runs(tmp_path_factory):
    """Two complete pipeline runs plus stage timings."""
    results = []
    for tag in ("a", "b"):
        out = tmp_path_factory.mktemp(f"accept_{tag}")
        cfg = RunConfig(out_root=str(out), generation=GenerationConfig(), backend="pixelpool")
        t0 = time.monotonic()
        from closurebench.pipeline import stage_gen

        manifests = stage_gen(cfg)
        gen_seconds = time.monotonic() - t0
        run_command("all", cfg)  # gen is cached; runs the remaining stages
        total_seconds = time.monotonic() - t0
        results.append(
            {
                "cfg": cfg,
                "out": str(out),
                "manifests": manifests,
                "gen_seconds": gen_seconds,
                "total_seconds": total_seconds,
            }
        )
    return results


# ---------------------------------------------------------------------------
# criterion 1: dataset contracts


@criterion("dataset contracts: exp1 32/192/768, exp2 288 sets, runtime")
def test_dataset_contracts(pipeline_runs):
    run = pipeline_runs[0]
    manifests = run["manifests"]
    for variant in ("exp1_triangles", "exp1_kanizsa"):
        counts = {}
        for s in manifests[variant].specs:
            counts[s.group] = counts.get(s.group, 0) + 1
        assert counts == {"complete": 32, "aligned": 192, "disordered": 768}, variant
        assert len(manifests[variant].specs) == 992
    total_exp2 = 0
    for condition in ("exp2_lines", "exp2_kanizsa"):
        specs = manifests[condition].specs
        assert len({s.set_id for s in specs}) == 288, condition
        assert len(specs) == 1152, condition
        total_exp2 += len(specs)
    assert total_exp2 == 2304
    # every listed file really exists (counts and files revalidated on load)
    for experiment in manifests:
        load_manifest(
            os.path.join(run["out"], "datasets", experiment, "manifest.json"),
            root=os.path.join(run["out"], "datasets"),
        )
    assert run["gen_seconds"] < GEN_TIME_LIMIT_S, f"generation took {run['gen_seconds']:.1f}s"


# ---------------------------------------------------------------------------
# criterion 2: geometry suite


def _fit_arm_line(coverage, origin, direction, proj_lo=5.0, proj_hi=16.0, band=1.8):
    """Weighted PCA line fit to the stroke ink of one fragment arm.

    Anti-aliased coverage is symmetric across the stroke centerline, so
    the weighted principal axis estimates the centerline without bias.
    """
    ox, oy = origin
    dx, dy = direction
    x0 = int(ox + min(0.0, proj_hi * dx) - band - 2)
    x1 = int(ox + max(0.0, proj_hi * dx) + band + 3)
    y0 = int(oy + min(0.0, proj_hi * dy) - band - 2)
    y1 = int(oy + max(0.0, proj_hi * dy) + band + 3)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    px = xs + 0.5
    py = ys + 0.5
    proj = (px - ox) * dx + (py - oy) * dy
    perp = -(px - ox) * dy + (py - oy) * dx
    w = coverage[y0:y1, x0:x1] * ((proj >= proj_lo) & (proj <= proj_hi) & (np.abs(perp) <= band))
    total = w.sum()
    assert total > 1.0, "no ink found along the expected arm"
    mx = float((w * px).sum() / total)
    my = float((w * py).sum() / total)
    cxx = float((w * (px - mx) ** 2).sum() / total)
    cxy = float((w * (px - mx) * (py - my)).sum() / total)
    cyy = float((w * (py - my) ** 2).sum() / total)
    evals, evecs = np.linalg.eigh(np.array([[cxx, cxy], [cxy, cyy]]))
    u = evecs[:, int(np.argmax(evals))]
    return (mx, my), (float(u[0]), float(u[1]))


def _intersect_lines(p1, u1, p2, u2):
    a = np.array([[u1[0], -u2[0]], [u1[1], -u2[1]]])
    b = np.array([p2[0] - p1[0], p2[1] - p1[1]])
    t, _ = np.linalg.solve(a, b)
    return (p1[0] + t * u1[0], p1[1] + t * u1[1])


def measure_triangle_vertices(img, spec):
    """Estimate vertex positions from a rendered complete triangle."""
    coverage = (255.0 - img.astype(np.float64)) / 255.0
    verts = triangle_vertices(spec)
    estimates = []
    for i, v in enumerate(verts):
        arms = []
        for j in (1, 2):
            other = verts[(i + j) % 3]
            d = (other[0] - v[0], other[1] - v[1])
            n = math.hypot(*d)
            arms.append(_fit_arm_line(coverage, v, (d[0] / n, d[1] / n)))
        estimates.append(_intersect_lines(arms[0][0], arms[0][1], arms[1][0], arms[1][1]))
    return estimates


@criterion("geometry: analytic + raster vertex distances, alignment, mouths")
def test_geometry_suite():
    # analytic pairwise distances on the whole rotation grid
    for theta in range(0, 120, 15):
        for center in ((150.0, 150.0), (134.0, 134.0)):
            v = triangle_vertices(TriangleSpec(center=center, theta_global=float(theta)))
            for i in range(3):
                for j in range(i + 1, 3):
                    assert abs(math.dist(v[i], v[j]) - 116.0) <= 1e-9

    # raster-measured pairwise distances
    for theta in (0.0, 15.0, 45.0):
        spec = TriangleSpec(center=(150.0, 150.0), theta_global=theta)
        img = render(complete_triangle_scene(spec), 300, 4)
        est = measure_triangle_vertices(img, spec)
        for i in range(3):
            for j in range(i + 1, 3):
                measured = math.dist(est[i], est[j])
                assert abs(measured - 116.0) <= 0.5, (theta, i, j, measured)

    # aligned fragments lie on the complete outline
    spec = TriangleSpec(center=(150.0, 150.0), theta_global=30.0)
    verts = triangle_vertices(spec)

    def outline_distance(p):
        best = math.inf
        for k in range(3):
            a, b = verts[k], verts[(k + 1) % 3]
            dx, dy = b[0] - a[0], b[1] - a[1]
            t = min(1.0, max(0.0, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)))
            best = min(best, math.dist(p, (a[0] + t * dx, a[1] + t * dy)))
        return best

    for edge in (3.0, 13.0, 29.0):
        for frag in triangle_fragments(spec, edge, theta_local=0.0):
            poly = fragment_polyline(frag).points
            for t in np.linspace(0.0, 1.0, 9):
                for end in (poly[0], poly[2]):
                    p = (
                        poly[1][0] + t * (end[0] - poly[1][0]),
                        poly[1][1] + t * (end[1] - poly[1][1]),
                    )
                    assert outline_distance(p) <= 1e-9

    # valid mouths aim at the centroid to within 1e-9 rad
    for theta in (0.0, 52.5):
        spec = TriangleSpec(center=(134.0, 134.0), theta_global=theta)
        for pac in kanizsa_pacmen(spec, radius=18.0, theta_local=0.0):
            aim = math.atan2(134.0 - pac.center[1], 134.0 - pac.center[0])
            got = math.radians(pac.mouth_bisector + pac.local_rotation)
            diff = abs(math.atan2(math.sin(got - aim), math.cos(got - aim)))
            assert diff <= 1e-9

    # removal-fraction spot values
    assert abs(removal_fraction(29.0, 116.0) - 0.5) <= 1e-12
    assert abs(removal_fraction(43.0, 95.0) - 0.0947368421052632) <= 1e-10


# ---------------------------------------------------------------------------
# criterion 3: measure oracles


def loop_cosine(x, y):
    dot = nx = ny = 0.0
    for a, b in zip(x.tolist(), y.tolist()):
        dot += a * b
        nx += a * a
        ny += b * b
    return dot / math.sqrt(nx) / math.sqrt(ny)


def loop_euclid(x, y):
    acc = 0.0
    for a, b in zip(x.tolist(), y.tolist()):
        acc += (a - b) ** 2
    return math.sqrt(acc)


def loop_ce(ba, bb, ca, cb):
    dc = loop_euclid(ca, cb)
    db = loop_euclid(ba, bb)
    if dc + db == 0.0:  # degenerate set records CE = 0 by convention
        return 0.0
    return (dc - db) / (dc + db)


@criterion("measure oracles: 1000 random vectors + full pixelpool run")
def test_measure_oracles(pipeline_runs):
    rng = np.random.default_rng(12345)
    for _ in range(1000):
        n = int(rng.integers(2, 100))
        x, y = rng.normal(size=n), rng.normal(size=n)
        assert close_rel(cosine_similarity(x, y), loop_cosine(x, y))
        ba, bb, ca, cb = (rng.normal(size=n) for _ in range(4))
        ce = configural_effect(ba, bb, ca, cb)
        assert close_rel(ce, loop_ce(ba, bb, ca, cb))
        assert -1.0 <= ce <= 1.0
        assert close_rel(configural_effect(ca, cb, ba, bb), -ce)

    # full pixelpool run: every persisted record equals the brute-force value
    run = pipeline_runs[0]
    store = FeatureStore(os.path.join(run["out"], "features"))
    csv_rows = read_records_csv(os.path.join(run["out"], "records.csv"))
    by_key = {}
    for r in csv_rows:
        key = (
            r["dataset_id"],
            r["theta_global"],
            r["theta_local"],
            r["edge_length"],
            r["background"],
            r["center"],
            r["set_id"],
        )
        by_key[key] = r["value"]
    assert len(by_key) == len(csv_rows)

    checked = 0
    for experiment, manifest in run["manifests"].items():
        feats = store.load_map(experiment, "pixelpool")
        if experiment.startswith("exp1"):
            for t in pair_exp1(manifest):
                want = loop_cosine(feats[t.aligned.file_path], feats[t.complete.file_path]) - (
                    loop_cosine(feats[t.disordered.file_path], feats[t.complete.file_path])
                )
                got = by_key[
                    (
                        experiment,
                        t.disordered.theta_global,
                        t.disordered.theta_local,
                        t.disordered.edge_length,
                        t.disordered.background,
                        f"{t.disordered.center[0]:g}x{t.disordered.center[1]:g}",
                        None,
                    )
                ]
                assert close_rel(got, want)
                checked += 1
        else:
            for members in pair_exp2(manifest):
                want = loop_ce(
                    feats[members["base_a"].file_path],
                    feats[members["base_b"].file_path],
                    feats[members["composite_a"].file_path],
                    feats[members["composite_b"].file_path],
                )
                ref = members["composite_a"]
                got = by_key[
                    (
                        experiment,
                        ref.theta_global,
                        None,
                        ref.edge_length,
                        ref.background,
                        f"{ref.center[0]:g}x{ref.center[1]:g}",
                        ref.set_id,
                    )
                ]
                assert close_rel(got, want)
                assert -1.0 <= got <= 1.0
                checked += 1
    assert checked == 768 * 2 + 288 * 2


# ---------------------------------------------------------------------------
# criterion 4: statistics oracles


@criterion("statistics oracles: normal equations, orthogonality, t closed forms")
def test_statistics_oracles():
    from closurebench.stats import DesignSpec, ols_fit

    rng = np.random.default_rng(777)
    for _ in range(100):
        n = int(rng.integers(20, 201))
        p = int(rng.integers(2, 13))
        x = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
        beta_true = rng.normal(size=p)
        y = x @ beta_true + rng.normal(size=n)
        names = [f"x{i}" for i in range(1, p)]
        rows = [
            {**{nm: x[i, j + 1] for j, nm in enumerate(names)}, "y": y[i]} for i in range(n)
        ]
        res = ols_fit(DesignSpec(outcome="y", continuous=tuple(names)), rows)
        want = np.linalg.solve(x.T @ x, x.T @ y)
        got = np.array([c.estimate for c in res.coefficients])
        assert np.all(np.abs(got - want) <= REL_TOL * np.maximum(1.0, np.abs(want)))
        resid = y - x @ got
        assert np.abs(x.T @ resid).max() <= 1e-8 * np.linalg.norm(y)

    res = one_sample_ttest([1.0, 2.0, 3.0], mu0=0.0)
    assert abs(res.t - 3.4641016151377544) <= 1e-9
    assert res.df == 2
    closed_form_p = 2.0 * (1.0 - res.t / math.sqrt(2.0 + res.t**2)) / 2.0
    assert abs(res.p - closed_form_p) <= 1e-12
    assert abs(res.p - 0.0742) <= 1e-4
    assert abs(student_t_sf(1.0, 1) - 0.25) <= 1e-10


# ---------------------------------------------------------------------------
# criterion 5: end-to-end determinism


@criterion("determinism: two pipeline runs byte-identical, within time budget")
def test_pipeline_determinism(pipeline_runs):
    run_a, run_b = pipeline_runs
    for name in ("records.csv", "summary.md"):
        a = open(os.path.join(run_a["out"], name), "rb").read()
        b = open(os.path.join(run_b["out"], name), "rb").read()
        assert a == b, f"{name} differs between runs"
    figs_a = sorted(os.listdir(os.path.join(run_a["out"], "figures")))
    figs_b = sorted(os.listdir(os.path.join(run_b["out"], "figures")))
    assert figs_a == figs_b and len(figs_a) == 4
    for name in figs_a:
        a = open(os.path.join(run_a["out"], "figures", name), "rb").read()
        b = open(os.path.join(run_b["out"], "figures", name), "rb").read()
        assert a == b, f"figure {name} differs between runs"
    for run in (run_a, run_b):
        assert (
            run["total_seconds"] < PIPELINE_TIME_LIMIT_S
        ), f"pipeline took {run['total_seconds']:.1f}s"
    # sanity on the analysis artifacts of run A
    reg = json.load(open(os.path.join(run_a["out"], "regression.json")))
    assert set(reg) == {"exp1_triangles", "exp1_kanizsa"}
    tt = json.load(open(os.path.join(run_a["out"], "ttests.json")))
    assert set(tt) == {"exp1_triangles", "exp1_kanizsa", "exp2_lines", "exp2_kanizsa"}
