"""Deterministic SVG charts rendered straight from CSV-style tables.

No drawing library: the output must be byte-stable for identical input, so
every coordinate is formatted with a fixed precision and nothing (ids, dates,
font metrics) depends on the environment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 34, 48
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2")


@dataclass(frozen=True)
class ChartSpec:
    """Which table columns to plot and how."""

    x: str
    ys: tuple[str, ...]
    series: tuple[str, ...] = ()  # extra columns splitting rows into series
    kind: str = "line"  # line | scatter
    title: str = ""
    x_label: str = ""
    y_label: str = ""


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(header: Sequence[str], rows: Sequence[Sequence], chart: ChartSpec) -> str:
    idx = {name: i for i, name in enumerate(header)}
    for col in (chart.x, *chart.ys, *chart.series):
        if col not in idx:
            raise ValueError(f"chart column {col!r} not in table header {list(header)}")

    series: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        x = row[idx[chart.x]]
        if x == "" or x is None:
            continue
        tag = ",".join(str(row[idx[c]]) for c in chart.series)
        for ycol in chart.ys:
            y = row[idx[ycol]]
            if y == "" or y is None:
                continue
            name = f"{tag}:{ycol}" if tag else ycol
            series.setdefault(name, []).append((float(x), float(y)))

    pts = [p for ps in series.values() for p in ps]
    if not pts:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    ypad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - ypad, yhi + ypad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x: float) -> float:
        return _ML + (x - xlo) / (xhi - xlo) * pw

    def py(y: float) -> float:
        return _MT + (yhi - y) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="#333333" stroke-width="1"/>',
    ]
    if chart.title:
        out.append(f'<text x="{_W // 2}" y="20" text-anchor="middle" '
                   f'font-family="monospace" font-size="14">{chart.title}</text>')
    for t in _ticks(xlo, xhi):
        X = px(t)
        out.append(f'<line x1="{_fmt(X)}" y1="{_MT + ph}" x2="{_fmt(X)}" '
                   f'y2="{_MT + ph + 5}" stroke="#333333"/>')
        out.append(f'<text x="{_fmt(X)}" y="{_MT + ph + 18}" text-anchor="middle" '
                   f'font-family="monospace" font-size="10">{t:.6g}</text>')
    for t in _ticks(ylo, yhi):
        Y = py(t)
        out.append(f'<line x1="{_ML - 5}" y1="{_fmt(Y)}" x2="{_ML}" y2="{_fmt(Y)}" '
                   f'stroke="#333333"/>')
        out.append(f'<text x="{_ML - 8}" y="{_fmt(Y + 3)}" text-anchor="end" '
                   f'font-family="monospace" font-size="10">{t:.6g}</text>')
    if chart.x_label:
        out.append(f'<text x="{_W // 2}" y="{_H - 10}" text-anchor="middle" '
                   f'font-family="monospace" font-size="12">{chart.x_label}</text>')
    if chart.y_label:
        out.append(f'<text x="14" y="{_MT + ph // 2}" text-anchor="middle" '
                   f'font-family="monospace" font-size="12" '
                   f'transform="rotate(-90 14 {_MT + ph // 2})">{chart.y_label}</text>')

    for si, name in enumerate(sorted(series)):
        color = _PALETTE[si % len(_PALETTE)]
        ps = sorted(series[name])
        if chart.kind == "line":
            coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in ps)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"/>')
        else:
            for x, y in ps:
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.2" '
                           f'fill="{color}"/>')
        ly = _MT + 14 + 14 * si
        out.append(f'<line x1="{_ML + pw - 150}" y1="{ly - 4}" x2="{_ML + pw - 130}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_ML + pw - 125}" y="{ly}" font-family="monospace" '
                   f'font-size="10">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(header: Sequence[str], rows: Sequence[Sequence], chart: ChartSpec, path) -> None:
    svg = render_svg(header, rows, chart)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(svg)
