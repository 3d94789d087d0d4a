"""Analysis and reporting: regressions, t-tests, verdicts, figures, and
the cross-model summary table.

Verdicts are a pure function of the persisted artifacts (records.csv,
regression.json, ttests.json): rebuilding the summary from disk
reproduces it byte for byte.
"""

from __future__ import annotations

import json
import os

from .dataset import EXPERIMENTS
from .geometry import SQUARE_SIDE, TRIANGLE_SIDE, removal_fraction
from .pipeline import RunConfig, StageError, read_records_csv
from .stats import (
    DesignSpec,
    effect_size_tier,
    group_mean_stderr,
    ols_fit,
    one_sample_ttest,
)
from .svgplot import LineSeries, plot_lines

REFERENCE_LEVELS = {
    "theta_global": 0.0,
    "background": "white",
    "center": "150x150",
    "theta_local": 72.0,
}

EDGE_COEF_ALPHA = 0.001
OVERALL_ALPHA = 0.05
TTEST_ALPHA = 0.05
CE_MODERATE_PEAK = 0.1

VERDICT_RULES = (
    "similarity method: the regression must be significant overall "
    f"(F-test p < {OVERALL_ALPHA:g}) with a positive edge-length coefficient at "
    f"p < {EDGE_COEF_ALPHA:g}; adjusted R^2 >= 0.40 marks a moderate effect, "
    "anything smaller a small effect. "
    "CE method: some edge length must show mean CE > 0 with a one-sample "
    f"t-test p < {TTEST_ALPHA:g}; a peak mean CE >= {CE_MODERATE_PEAK:g} marks a "
    "moderate effect. The removal threshold r <= a uses the smallest edge "
    "length whose trailing run of per-edge-length tests (mean > 0, "
    f"p < {TTEST_ALPHA:g}) is unbroken up to the largest edge length, with the "
    "removal fraction rounded to one decimal."
)

_SIDE_BY_EXPERIMENT = {"exp1": TRIANGLE_SIDE, "exp2": SQUARE_SIDE}

_METHOD_BY_EXPERIMENT = {"exp1": "similarity", "exp2": "ce"}


def _dataset_order(rows: list[dict]) -> list[str]:
    present = {r["dataset_id"] for r in rows}
    return [d for d in EXPERIMENTS if d in present]


def _model_order(rows: list[dict]) -> list[str]:
    seen: list[str] = []
    for r in rows:
        if r["model"] not in seen:
            seen.append(r["model"])
    return seen


def run_regressions(rows: list[dict]) -> dict:
    """One regression per (first-experiment dataset, model)."""
    out: dict = {}
    for dataset_id in _dataset_order(rows):
        if not dataset_id.startswith("exp1"):
            continue
        out[dataset_id] = {}
        for model in _model_order(rows):
            sub = [r for r in rows if r["dataset_id"] == dataset_id and r["model"] == model]
            if not sub:
                continue
            nominal = {
                "theta_global": REFERENCE_LEVELS["theta_global"],
                "background": REFERENCE_LEVELS["background"],
                "center": REFERENCE_LEVELS["center"],
            }
            if sub[0]["theta_local"] is not None:
                nominal["theta_local"] = REFERENCE_LEVELS["theta_local"]
            design = DesignSpec(outcome="value", continuous=("edge_length",), nominal=nominal)
            res = ols_fit(design, sub)
            out[dataset_id][model] = {
                "n": res.n,
                "df_resid": res.df_resid,
                "f_stat": res.f_stat,
                "f_p": res.f_p,
                "r_squared": res.r_squared,
                "adj_r_squared": res.adj_r_squared,
                "effect_tier": effect_size_tier(res.adj_r_squared),
                "reference_levels": {k: nominal[k] for k in nominal},
                "coefficients": [
                    {
                        "name": c.name,
                        "estimate": c.estimate,
                        "std_error": c.std_error,
                        "t": c.t,
                        "p": c.p,
                    }
                    for c in res.coefficients
                ],
            }
    return out


def run_ttests(rows: list[dict]) -> dict:
    """Per (dataset, model, edge length) one-sample t-test against 0."""
    out: dict = {}
    for dataset_id in _dataset_order(rows):
        out[dataset_id] = {}
        for model in _model_order(rows):
            sub = [r for r in rows if r["dataset_id"] == dataset_id and r["model"] == model]
            if not sub:
                continue
            cells = {}
            edges = sorted({r["edge_length"] for r in sub})
            for e in edges:
                values = [r["value"] for r in sub if r["edge_length"] == e]
                cell: dict = {"n": len(values)}
                try:
                    t = one_sample_ttest(values, mu0=0.0)
                    cell.update(
                        mean=t.mean, std_error=t.std_error, t=t.t, df=t.df, p=t.p
                    )
                except ValueError as exc:
                    cell.update(mean=sum(values) / len(values), error=str(exc))
                cells[f"{e:g}"] = cell
            out[dataset_id][model] = cells
    return out


# ---------------------------------------------------------------------------
# Verdicts


def _edge_passes(cell: dict) -> bool:
    return "error" not in cell and cell["mean"] > 0.0 and cell["p"] < TTEST_ALPHA


def _threshold_edge(cells: dict) -> float | None:
    """Smallest edge whose trailing run of passing tests reaches the top
    of the grid; falls back to the smallest passing edge."""
    edges = sorted(float(e) for e in cells)
    passing = {e for e in edges if _edge_passes(cells[f"{e:g}"])}
    if not passing:
        return None
    start = None
    for e in reversed(edges):
        if e in passing:
            start = e
        else:
            break
    return start if start is not None else min(passing)


def _threshold_label(edge: float | None, experiment: str) -> tuple[float | None, str | None]:
    if edge is None:
        return None, None
    r = round(removal_fraction(edge, _SIDE_BY_EXPERIMENT[experiment]), 1)
    return r, f"r <= {r:g}"


def derive_verdicts(regressions: dict, ttests: dict) -> dict:
    """Summary cells per (dataset, model) from the stats artifacts."""
    cells: dict = {}
    for dataset_id, per_model in ttests.items():
        experiment = dataset_id.split("_", 1)[0]
        method = _METHOD_BY_EXPERIMENT[experiment]
        cells[dataset_id] = {}
        for model, tcells in per_model.items():
            if method == "similarity":
                reg = regressions.get(dataset_id, {}).get(model)
                if reg is None:
                    continue
                edge_coef = next(
                    c for c in reg["coefficients"] if c["name"] == "edge_length"
                )
                significant = (
                    reg["f_p"] < OVERALL_ALPHA
                    and edge_coef["p"] < EDGE_COEF_ALPHA
                    and edge_coef["estimate"] > 0.0
                )
                if not significant:
                    verdict = "no-effect"
                elif reg["effect_tier"] == "moderate":
                    verdict = "effect-moderate"
                else:
                    verdict = "effect-small"
                peak = None
            else:
                passing = [c for c in tcells.values() if _edge_passes(c)]
                peak = max((c["mean"] for c in tcells.values() if "error" not in c), default=None)
                if not passing:
                    verdict = "no-effect"
                elif max(c["mean"] for c in passing) >= CE_MODERATE_PEAK:
                    verdict = "effect-moderate"
                else:
                    verdict = "effect-small"
            if verdict == "no-effect":
                threshold_r, threshold_label = None, None
            else:
                threshold_r, threshold_label = _threshold_label(
                    _threshold_edge(tcells), experiment
                )
            cells[dataset_id][model] = {
                "method": method,
                "verdict": verdict,
                "threshold_r": threshold_r,
                "threshold_label": threshold_label,
                "peak_mean": peak,
            }
    return cells


# ---------------------------------------------------------------------------
# Figures


_MEASURE_LABELS = {
    "exp1": ("closure measure", "mean closure measure vs edge length"),
    "exp2": ("configural effect", "mean CE vs edge length"),
}


def build_figures(rows: list[dict]) -> dict[str, str]:
    """One SVG per dataset: per-edge-length means with standard errors."""
    figures = {}
    for dataset_id in _dataset_order(rows):
        experiment = dataset_id.split("_", 1)[0]
        ylabel, title = _MEASURE_LABELS[experiment]
        series = []
        for model in _model_order(rows):
            sub = [r for r in rows if r["dataset_id"] == dataset_id and r["model"] == model]
            if not sub:
                continue
            stats = group_mean_stderr(
                sub, key_fn=lambda r: r["edge_length"], value_fn=lambda r: r["value"]
            )
            edges = sorted(stats)
            series.append(
                LineSeries(
                    label=model,
                    x=tuple(edges),
                    y=tuple(stats[e][0] for e in edges),
                    yerr=tuple(stats[e][1] or 0.0 for e in edges),
                )
            )
        figures[f"{dataset_id}.svg"] = plot_lines(
            series,
            title=f"{dataset_id}: {title}",
            xlabel="edge length (px)",
            ylabel=ylabel,
            y_range=(-1.0, 1.0),
        )
    return figures


# ---------------------------------------------------------------------------
# Summary


_COLUMN_TITLES = {
    "exp1_triangles": "Similarity: triangles",
    "exp1_kanizsa": "Similarity: Kanizsa triangles",
    "exp2_lines": "CE: line segments",
    "exp2_kanizsa": "CE: Kanizsa squares",
}

_FOOTNOTES = (
    "r is the removal fraction (side - 2*edge)/side, rounded to one decimal; "
    "the threshold is taken at the smallest edge length whose per-edge tests "
    "pass from there up to the largest edge length.",
    "The second experiment's edge-length grid contains 29 px; externally "
    "quoted 28 px thresholds correspond to the 29 px grid point.",
)


def _format_cell(cell: dict | None) -> str:
    if cell is None:
        return "not run"
    if cell["verdict"] == "no-effect":
        return "no effect"
    label = "moderate" if cell["verdict"] == "effect-moderate" else "small"
    if cell["threshold_label"]:
        return f"effect ({label}, {cell['threshold_label']})"
    return f"effect ({label})"


def build_summary(
    rows: list[dict],
    regressions: dict,
    ttests: dict,
    annotations: dict | None = None,
) -> tuple[dict, str]:
    """(summary dict, markdown document)."""
    cells = derive_verdicts(regressions, ttests)
    datasets = _dataset_order(rows)
    models = _model_order(rows)
    annotations = annotations or {}
    ann_columns = sorted({k for v in annotations.values() for k in v})

    summary = {
        "rules": VERDICT_RULES,
        "reference_levels": REFERENCE_LEVELS,
        "datasets": datasets,
        "models": {
            m: {d: cells.get(d, {}).get(m) for d in datasets} for m in models
        },
        "annotations": annotations,
        "footnotes": list(_FOOTNOTES),
    }

    lines = ["# Closure effect summary", ""]
    lines.append(f"Verdict rules: {VERDICT_RULES}")
    lines.append("")
    ref = ", ".join(f"{k}={v}" for k, v in REFERENCE_LEVELS.items())
    lines.append(f"Dummy-coding reference levels: {ref}.")
    lines.append("")
    header = ["Model"] + ann_columns + [_COLUMN_TITLES.get(d, d) for d in datasets]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for m in models:
        row = [m]
        for col in ann_columns:
            v = annotations.get(m, {}).get(col)
            row.append("-" if v is None else f"{v:g}")
        for d in datasets:
            row.append(_format_cell(cells.get(d, {}).get(m)))
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    for note in _FOOTNOTES:
        lines.append(f"- {note}")
    lines.append("")
    return summary, "\n".join(lines)


# ---------------------------------------------------------------------------
# Stages


def stage_analyze(cfg: RunConfig) -> None:
    try:
        rows = read_records_csv(cfg.records_path())
    except OSError as exc:
        raise StageError("analyze", f"cannot read records: {exc}") from exc
    try:
        regressions = run_regressions(rows)
        ttests = run_ttests(rows)
    except ValueError as exc:
        raise StageError("analyze", str(exc)) from exc
    for name, doc in (("regression.json", regressions), ("ttests.json", ttests)):
        path = os.path.join(cfg.out_root, name)
        tmp = path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(doc, f, indent=1, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)


def load_annotations(path) -> dict:
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise ValueError("annotations file must map model ids to column dicts")
    return doc


def stage_report(cfg: RunConfig) -> None:
    try:
        rows = read_records_csv(cfg.records_path())
        with open(os.path.join(cfg.out_root, "regression.json")) as f:
            regressions = json.load(f)
        with open(os.path.join(cfg.out_root, "ttests.json")) as f:
            ttests = json.load(f)
    except OSError as exc:
        raise StageError("report", f"missing analysis artifacts: {exc}") from exc

    annotations = None
    if cfg.annotations:
        try:
            annotations = load_annotations(cfg.annotations)
        except (OSError, ValueError) as exc:
            raise StageError("report", f"bad annotations file: {exc}") from exc

    fig_dir = os.path.join(cfg.out_root, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    for name, svg in build_figures(rows).items():
        with open(os.path.join(fig_dir, name), "w") as f:
            f.write(svg)

    summary, md = build_summary(rows, regressions, ttests, annotations)
    with open(os.path.join(cfg.out_root, "summary.json"), "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")
    with open(os.path.join(cfg.out_root, "summary.md"), "w") as f:
        f.write(md)
