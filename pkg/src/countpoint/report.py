"""CSV, text and SVG outputs.

CSV files are the source of truth; everything else is derived from them.
Numbers are written with fixed precision so reruns compare byte for byte.
"""

from __future__ import annotations

import csv
import html
import io
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import stats

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.6f" % x


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_stats(path, results: Sequence[stats.StatResult], header: str = "") -> None:
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    lines.append("# test\tlabel\tstatistic\tdof\tp_value")
    lines.extend(r.line() for r in results)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_dat(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Whitespace-separated columns for gnuplot."""
    lines = ["# " + " ".join(header)]
    for row in rows:
        lines.append(" ".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def mean_ci(values: Sequence[float]) -> tuple[float, Optional[float], Optional[float]]:
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return float("nan"), None, None
    m, ci = stats.t_interval(vals)
    return (m, None, None) if ci is None else (m, ci[0], ci[1])


# -- SVG --------------------------------------------------------------------------

class _Svg:
    def __init__(self, width: int, height: int):
        self.w, self.h = width, height
        self.parts = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
                      'viewBox="0 0 %d %d" font-family="sans-serif" font-size="12">' % (width, height, width, height),
                      '<rect width="100%" height="100%" fill="white"/>']

    def line(self, x1, y1, x2, y2, color="black", width=1.0, dash=None):
        d = ' stroke-dasharray="%s"' % dash if dash else ""
        self.parts.append('<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" stroke="%s" stroke-width="%.2f"%s/>'
                          % (x1, y1, x2, y2, color, width, d))

    def rect(self, x, y, w, h, color, opacity=1.0):
        self.parts.append('<rect x="%.2f" y="%.2f" width="%.2f" height="%.2f" fill="%s" fill-opacity="%.2f"/>'
                          % (x, y, w, h, color, opacity))

    def polyline(self, pts, color, width=1.5):
        p = " ".join("%.2f,%.2f" % xy for xy in pts)
        self.parts.append('<polyline points="%s" fill="none" stroke="%s" stroke-width="%.2f"/>' % (p, color, width))

    def polygon(self, pts, color, opacity):
        p = " ".join("%.2f,%.2f" % xy for xy in pts)
        self.parts.append('<polygon points="%s" fill="%s" fill-opacity="%.2f" stroke="none"/>' % (p, color, opacity))

    def text(self, x, y, s, anchor="middle", size=12):
        self.parts.append('<text x="%.2f" y="%.2f" text-anchor="%s" font-size="%d">%s</text>'
                          % (x, y, anchor, size, html.escape(str(s))))

    def save(self, path):
        Path(path).write_text("\n".join(self.parts + ["</svg>"]) + "\n", encoding="utf-8")


_L, _R, _T, _B = 60, 20, 40, 50


def _axes(svg: _Svg, title: str, ylabel: str, ymax: float = 1.0):
    x0, x1, y0, y1 = _L, svg.w - _R, svg.h - _B, _T
    svg.text(svg.w / 2, 22, title, size=14)
    svg.line(x0, y0, x1, y0)
    svg.line(x0, y0, x0, y1)
    for k in range(6):
        v = ymax * k / 5
        y = y0 - (y0 - y1) * k / 5
        svg.line(x0 - 4, y, x0, y)
        svg.line(x0, y, x1, y, color="#dddddd", width=0.5)
        svg.text(x0 - 8, y + 4, "%g" % round(v * 100, 1), anchor="end", size=10)
    svg.text(14, (y0 + y1) / 2, ylabel, anchor="middle", size=11)
    return x0, x1, y0, y1


def bar_chart(path, title: str, labels: Sequence[str], means: Sequence[float],
              cis: Sequence[Optional[tuple]], overlay: Optional[Sequence[Optional[float]]] = None,
              overlay_label: str = "children", width: int = 480, height: int = 320) -> None:
    """Bars with 95% CI whiskers; optional reference markers drawn beside each bar."""
    svg = _Svg(width, height)
    x0, x1, y0, y1 = _axes(svg, title, "accuracy %")
    n = len(labels)
    slot = (x1 - x0) / max(n, 1)
    bw = slot * (0.35 if overlay is not None else 0.6)

    def y(v):
        return y0 - (y0 - y1) * min(max(v, 0.0), 1.0)

    for i, (lab, m) in enumerate(zip(labels, means)):
        cx = x0 + slot * (i + 0.5)
        bx = cx - bw - 2 if overlay is not None else cx - bw / 2
        if not math.isnan(m):
            svg.rect(bx, y(m), bw, y0 - y(m), PALETTE[0], 0.85)
            ci = cis[i]
            if ci is not None:
                mx = bx + bw / 2
                svg.line(mx, y(ci[0]), mx, y(ci[1]), width=1.5)
                svg.line(mx - 5, y(ci[0]), mx + 5, y(ci[0]))
                svg.line(mx - 5, y(ci[1]), mx + 5, y(ci[1]))
        if overlay is not None and overlay[i] is not None:
            svg.rect(cx + 2, y(overlay[i]), bw, y0 - y(overlay[i]), PALETTE[4], 0.6)
        svg.text(cx, y0 + 18, lab, size=11)
    if overlay is not None:
        svg.rect(x1 - 150, y1 - 28, 10, 10, PALETTE[0], 0.85)
        svg.text(x1 - 135, y1 - 19, "network", anchor="start", size=10)
        svg.rect(x1 - 75, y1 - 28, 10, 10, PALETTE[4], 0.6)
        svg.text(x1 - 60, y1 - 19, overlay_label, anchor="start", size=10)
    svg.save(path)


def line_chart(path, title: str, series: Mapping[str, tuple], xlabel: str = "iteration",
               width: int = 560, height: int = 340) -> None:
    """``series``: name -> (xs, means, ci_low or None, ci_high or None)."""
    svg = _Svg(width, height)
    x0, x1, y0, y1 = _axes(svg, title, "accuracy %")
    allx = [x for xs, *_ in series.values() for x in xs]
    xmin, xmax = (min(allx), max(allx)) if allx else (0, 1)
    if xmax == xmin:
        xmax = xmin + 1

    def px(v):
        return x0 + (x1 - x0) * (v - xmin) / (xmax - xmin)

    def py(v):
        return y0 - (y0 - y1) * min(max(v, 0.0), 1.0)

    for k in range(5):
        v = xmin + (xmax - xmin) * k / 4
        svg.line(px(v), y0, px(v), y0 + 4)
        svg.text(px(v), y0 + 16, "%g" % round(v, 2), size=10)
    svg.text((x0 + x1) / 2, svg.h - 12, xlabel, size=11)
    for i, (name, (xs, ms, lo, hi)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [(px(x), py(m)) for x, m in zip(xs, ms) if not math.isnan(m)]
        if lo is not None and hi is not None:
            band = [(px(x), py(h)) for x, h in zip(xs, hi) if h is not None and not math.isnan(h)]
            band += [(px(x), py(l)) for x, l in reversed(list(zip(xs, lo))) if l is not None and not math.isnan(l)]
            if len(band) >= 3:
                svg.polygon(band, color, 0.15)
        if pts:
            svg.polyline(pts, color)
        ly = y1 + 14 * i
        svg.line(x1 - 120, ly, x1 - 105, ly, color=color, width=2)
        svg.text(x1 - 100, ly + 4, name, anchor="start", size=10)
    svg.save(path)
