"""Minimal standalone SVG line plots with symmetric error bars.

Hand-rolled rather than delegated to a plotting library so that output
bytes are a pure function of the input series (no embedded timestamps,
random ids, or backend version strings).
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
    "#bcbd22",
)


@dataclass(frozen=True)
class LineSeries:
    label: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    yerr: tuple[float, ...] | None = None


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def plot_lines(
    series: list[LineSeries],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    y_range: tuple[float, float] = (-1.0, 1.0),
    x_ticks: tuple[float, ...] | None = None,
    width: int = 640,
    height: int = 420,
) -> str:
    """Render series as a standalone SVG document string."""
    if not series:
        raise ValueError("no series to plot")
    for s in series:
        if len(s.x) == 0 or len(s.x) != len(s.y):
            raise ValueError(f"series {s.label!r} has empty or mismatched data")
        if s.yerr is not None and len(s.yerr) != len(s.x):
            raise ValueError(f"series {s.label!r} has mismatched error bars")

    xs = [v for s in series for v in s.x]
    x_min, x_max = min(xs), max(xs)
    if x_min == x_max:
        x_min, x_max = x_min - 1.0, x_max + 1.0
    y_min, y_max = y_range

    ml, mr, mt, mb = 64, 150, 40, 52
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v: float) -> float:
        return ml + (v - x_min) / (x_max - x_min) * pw

    def sy(v: float) -> float:
        return mt + (y_max - v) / (y_max - y_min) * ph

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(
            f'<text x="{width / 2:g}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{escape(title)}</text>'
        )

    # Frame, zero line, ticks.
    out.append(
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="black" stroke-width="1"/>'
    )
    if y_min < 0.0 < y_max:
        z = sy(0.0)
        out.append(
            f'<line x1="{ml}" y1="{_fmt(z)}" x2="{ml + pw}" y2="{_fmt(z)}" '
            f'stroke="#bbbbbb" stroke-width="1" stroke-dasharray="4 3"/>'
        )
    ticks_x = tuple(x_ticks) if x_ticks else tuple(sorted(set(xs)))
    for tx in ticks_x:
        px = sx(tx)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{mt + ph}" x2="{_fmt(px)}" y2="{mt + ph + 5}" '
            f'stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{mt + ph + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(tx)}</text>'
        )
    n_yticks = 5
    for k in range(n_yticks):
        tv = y_min + (y_max - y_min) * k / (n_yticks - 1)
        py = sy(tv)
        out.append(
            f'<line x1="{ml - 5}" y1="{_fmt(py)}" x2="{ml}" y2="{_fmt(py)}" '
            f'stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{ml - 9}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(tv)}</text>'
        )
    if xlabel:
        out.append(
            f'<text x="{ml + pw / 2:g}" y="{height - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{escape(xlabel)}</text>'
        )
    if ylabel:
        out.append(
            f'<text x="18" y="{mt + ph / 2:g}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 18 {mt + ph / 2:g})">{escape(ylabel)}</text>'
        )

    # Series: error bars under polylines under markers.
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if s.yerr is not None:
            for xv, yv, ev in zip(s.x, s.y, s.yerr):
                px, y0, y1 = sx(xv), sy(yv - ev), sy(yv + ev)
                out.append(
                    f'<line x1="{_fmt(px)}" y1="{_fmt(y0)}" x2="{_fmt(px)}" '
                    f'y2="{_fmt(y1)}" stroke="{color}" stroke-width="1"/>'
                )
                for yc in (y0, y1):
                    out.append(
                        f'<line x1="{_fmt(px - 3)}" y1="{_fmt(yc)}" x2="{_fmt(px + 3)}" '
                        f'y2="{_fmt(yc)}" stroke="{color}" stroke-width="1"/>'
                    )
        pts = " ".join(f"{_fmt(sx(xv))},{_fmt(sy(yv))}" for xv, yv in zip(s.x, s.y))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for xv, yv in zip(s.x, s.y):
            out.append(
                f'<circle cx="{_fmt(sx(xv))}" cy="{_fmt(sy(yv))}" r="2.5" fill="{color}"/>'
            )

    # Legend.
    lx, ly = ml + pw + 12, mt + 8
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        yy = ly + i * 18
        out.append(
            f'<line x1="{lx}" y1="{yy}" x2="{lx + 18}" y2="{yy}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{lx + 23}" y="{yy + 4}" font-family="sans-serif" '
            f'font-size="11">{escape(s.label)}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"
