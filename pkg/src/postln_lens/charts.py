"""Static SVG line charts: median line over an inner (p25-p75) and outer (p5-p95) band."""
from __future__ import annotations

import csv
import io
from xml.sax.saxutils import escape

import numpy as np

from .errors import FormatError
from .metrics import BANDS, MetricSeries

CSV_HEADER = ["stage", "p5", "p25", "p50", "p75", "p95", "n"]

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 20, 36, 48
COLOR = "#1f5fa8"


def series_to_csv(s: MetricSeries) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for stage, row, n in zip(s.stages, s.bands, s.counts):
        wr.writerow([stage, *(repr(float(v)) for v in row), n])
    return buf.getvalue()


def series_from_csv(text: str, name: str = "") -> MetricSeries:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise FormatError(f"metric CSV must start with {','.join(CSV_HEADER)}")
    stages, bands, counts = [], [], []
    try:
        for row in rows[1:]:
            if not row:
                continue
            stages.append(int(row[0]))
            bands.append([float(v) for v in row[1:6]])
            counts.append(int(row[6]))
    except (ValueError, IndexError) as e:
        raise FormatError(f"bad metric CSV row: {e}") from None
    return MetricSeries(name, stages, [], np.asarray(bands).reshape(len(stages), len(BANDS)), counts)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(stage: int, last: int) -> str:
    if stage == -1:
        return "Input"
    return "Full" if stage == last else f"L{stage}"


def render_svg(s: MetricSeries, title: str | None = None) -> str:
    title = title if title is not None else s.name
    ok = np.isfinite(s.bands).all(axis=1)
    stages = np.asarray(s.stages, dtype=float)
    lo = float(np.nanmin(s.bands)) if ok.any() else 0.0
    hi = float(np.nanmax(s.bands)) if ok.any() else 1.0
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    smin, smax = stages.min(), stages.max()
    span = smax - smin if smax > smin else 1.0

    def px(stage):
        return x0 + (stage - smin) / span * (x1 - x0)

    def py(v):
        return y0 - (v - lo) / (hi - lo) * (y0 - y1)

    def band(lower, upper):
        pts = [(px(st), py(v)) for st, v, good in zip(stages, upper, ok) if good]
        pts += [(px(st), py(v)) for st, v, good in reversed(list(zip(stages, lower, ok))) if good]
        return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)

    b = s.bands
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    last = int(smax)
    for st in s.stages:
        x = px(st)
        out.append(f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{_tick_label(st, last)}</text>')
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        y = py(v)
        out.append(f'<line x1="{x0 - 5}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{v:.3g}</text>')
    if ok.any():
        out.append(f'<polygon class="outer-band" points="{band(b[:, 0], b[:, 4])}" '
                   f'fill="{COLOR}" fill-opacity="0.18" stroke="none"/>')
        out.append(f'<polygon class="inner-band" points="{band(b[:, 1], b[:, 3])}" '
                   f'fill="{COLOR}" fill-opacity="0.40" stroke="none"/>')
        med = " ".join(f"{_fmt(px(st))},{_fmt(py(v))}" for st, v, good in zip(stages, b[:, 2], ok) if good)
        out.append(f'<polyline class="median" points="{med}" fill="none" stroke="{COLOR}" stroke-width="2"/>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 10}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">stage</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
