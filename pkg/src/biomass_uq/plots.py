"""Standalone SVG charts with their data embedded as comments.

The SVG text is a pure function of the input data, so figures diff cleanly
between runs.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart_svg", "error_band_svg", "uncertainty_chart_svg"]

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
MARKERS = ["circle", "diamond", "square", "triangle", "star", "circle", "square"]


def _fmt(v):
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def _marker(kind, x, y, color, r=4):
    if kind == "square":
        return f'<rect x="{_fmt(x - r)}" y="{_fmt(y - r)}" width="{2 * r}" height="{2 * r}" fill="{color}"/>'
    if kind == "diamond":
        pts = f"{_fmt(x)},{_fmt(y - r - 1)} {_fmt(x + r + 1)},{_fmt(y)} {_fmt(x)},{_fmt(y + r + 1)} {_fmt(x - r - 1)},{_fmt(y)}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    if kind == "triangle":
        pts = f"{_fmt(x)},{_fmt(y - r - 1)} {_fmt(x + r + 1)},{_fmt(y + r)} {_fmt(x - r - 1)},{_fmt(y + r)}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    if kind == "star":
        pts = []
        for k in range(10):
            rad = (r + 2) if k % 2 == 0 else (r + 2) * 0.45
            ang = -math.pi / 2 + k * math.pi / 5
            pts.append(f"{_fmt(x + rad * math.cos(ang))},{_fmt(y + rad * math.sin(ang))}")
        return f'<polygon points="{" ".join(pts)}" fill="{color}"/>'
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" fill="{color}"/>'


def _data_comment(table):
    header, rows = table
    lines = [",".join(header)] + [",".join(repr(v) if isinstance(v, float) else str(v) for v in r)
                                  for r in rows]
    body = "\n".join(lines).replace("--", "- -")
    return f"<!-- data\n{body}\n-->"


def line_chart_svg(series, title="", xlabel="", ylabel="", table=None, bands=None):
    """Render ``series`` (``[(label, xs, ys), ...]``) as markers joined by lines.

    ``bands`` is an optional ``[(xs, lower, upper), ...]`` list of shaded
    intervals drawn beneath the series.  NaN points are skipped.
    """
    xs_all = [v for _, xs, ys in series for v, w in zip(xs, ys) if np.isfinite(w)]
    ys_all = [w for _, _, ys in series for w in ys if np.isfinite(w)]
    for bx, lo, hi in bands or []:
        xs_all += list(bx)
        ys_all += [v for v in list(lo) + list(hi) if np.isfinite(v)]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y0, y1 = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
    ]
    if table is not None:
        out.append(_data_comment(table))
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               'fill="none" stroke="#333"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{MARGIN["top"] + ph}" x2="{_fmt(sx(t))}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{_fmt(sy(t))}" x2="{MARGIN["left"]}" '
                   f'y2="{_fmt(sy(t))}" stroke="#333"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{_fmt(sy(t) + 4)}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>')

    for k, (bx, lo, hi) in enumerate(bands or []):
        pts = [(sx(a), sy(b)) for a, b in zip(bx, hi)] + [(sx(a), sy(b)) for a, b in reversed(list(zip(bx, lo)))]
        poly = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
        out.append(f'<polygon points="{poly}" fill="{PALETTE[k % len(PALETTE)]}" fill-opacity="0.25" stroke="none"/>')

    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = [(sx(a), sy(b)) for a, b in zip(xs, ys) if np.isfinite(b)]
        if len(pts) > 1:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(_marker(MARKERS[k % len(MARKERS)], a, b, color))
        ly = MARGIN["top"] + 15 + 18 * k
        lx = MARGIN["left"] + pw + 15
        out.append(_marker(MARKERS[k % len(MARKERS)], lx, ly - 4, color))
        out.append(f'<text x="{lx + 12}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def error_band_svg(binned, title="Binned residuals", label="residual"):
    """Mean residual per bin with a mean +/- half-std band, on a log input axis."""
    centers = 0.5 * (np.log(binned.bin_low) + np.log(binned.bin_high))
    mean = binned.mean_residual
    table = (["bin", "bin_low", "bin_high", "mean_residual", "half_std", "count"],
             [[r["bin"], r["bin_low"], r["bin_high"], r["mean_residual"], r["half_std"], r["count"]]
              for r in binned.rows()])
    return line_chart_svg([(label, centers.tolist(), mean.tolist())], title=title,
                          xlabel=f"ln({binned.axis})", ylabel="residual (kg)", table=table,
                          bands=[(centers.tolist(), (mean - binned.half_std).tolist(),
                                  (mean + binned.half_std).tolist())])


def uncertainty_chart_svg(reports, title="Uncertainty per bin"):
    """One marker series per report: x = bin index, y = ratio in percent."""
    series, rows = [], []
    for rep in reports:
        label = rep.label or f"{rep.kind}:{rep.sort_key}"
        series.append((f"{label} ({100 * rep.overall:.2f}%)", list(range(rep.n_bins)),
                       (100 * np.asarray(rep.ratio)).tolist()))
        rows += [[label, r["bin"], r["bin_low"], r["bin_high"], r["count"], r["ratio"]] for r in rep.rows()]
        rows.append([label, "overall", "", "", int(np.sum(rep.count)), rep.overall])
    table = (["series", "bin", "bin_low", "bin_high", "count", "ratio"], rows)
    return line_chart_svg(series, title=title, xlabel="bin index", ylabel="ratio (%)", table=table)
