"""CSV and SVG rendering of histograms with a reference density overlay.

The SVG is written by hand (bars, axes, ticks, curve, legend) so that no
plotting library is needed and output is byte-stable.
"""

import csv
import json
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 64, "right": 20, "top": 36, "bottom": 48}


def write_histogram_csv(path, hist):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count", "density"])
        edges = hist.bin_edges
        for i in range(hist.counts.size):
            w.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                        int(hist.counts[i]), repr(float(hist.density[i]))])


def read_histogram_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in ("bin_left", "bin_right", "count", "density")}


def write_samples_csv(path, values, column):
    with open(path, "w", newline="") as fh:
        fh.write(column + "\n")
        for v in values:
            fh.write(repr(float(v)) + "\n")


def read_samples_csv(path):
    with open(path) as fh:
        next(fh)
        return np.array([float(line) for line in fh if line.strip()])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _nice_ticks(lo, hi, n=5):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    ticks = np.arange(start, hi + step * 1e-9, step)
    return [float(t) for t in ticks]


def _fmt(v):
    return f"{v:.2f}"


def _label(v):
    return f"{v:.4g}"


def render_svg(hist, reference=None, title="", xlabel="", reference_label="reference"):
    """Histogram bars (density scale) with an optional reference pdf curve.

    ``reference`` is a callable evaluated on a fine grid over the bin range.
    """
    edges = np.asarray(hist.bin_edges, dtype=float)
    dens = np.asarray(hist.density, dtype=float)
    x0, x1 = float(edges[0]), float(edges[-1])
    grid = np.linspace(x0, x1, 400)
    curve = None
    if reference is not None:
        curve = np.asarray(reference(grid), dtype=float)
    ymax = float(max(dens.max(initial=0.0), curve.max() if curve is not None else 0.0))
    ymax = ymax * 1.08 if ymax > 0 else 1.0

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + ph - y / ymax * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append('<g fill="#4c72b0" fill-opacity="0.6" stroke="#2a4a80" stroke-width="0.5">')
    for i, d in enumerate(dens):
        if d <= 0:
            continue
        xa, xb = sx(edges[i]), sx(edges[i + 1])
        out.append(f'<rect x="{_fmt(xa)}" y="{_fmt(sy(d))}" width="{_fmt(xb - xa)}" '
                   f'height="{_fmt(sy(0) - sy(d))}"/>')
    out.append("</g>")
    if curve is not None:
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(min(y, ymax)))}" for x, y in zip(grid, curve))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#c44e52" stroke-width="2"/>')
    # Axes and ticks.
    ax, ay = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{ax}" y1="{ay}" x2="{ax + pw}" y2="{ay}" stroke="black"/>')
    out.append(f'<line x1="{ax}" y1="{MARGIN["top"]}" x2="{ax}" y2="{ay}" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        x = sx(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{ay}" x2="{_fmt(x)}" y2="{ay + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{ay + 18}" text-anchor="middle">{_label(t)}</text>')
    for t in _nice_ticks(0.0, ymax):
        y = sy(t)
        out.append(f'<line x1="{ax - 5}" y1="{_fmt(y)}" x2="{ax}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{ax - 8}" y="{_fmt(y + 4)}" text-anchor="end">{_label(t)}</text>')
    if xlabel:
        out.append(f'<text x="{ax + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.2f})">density</text>')
    # Legend.
    lx, ly = ax + pw - 150, MARGIN["top"] + 8
    out.append(f'<rect x="{lx}" y="{ly}" width="14" height="10" fill="#4c72b0" fill-opacity="0.6"/>')
    out.append(f'<text x="{lx + 20}" y="{ly + 9}">data</text>')
    if curve is not None:
        out.append(f'<line x1="{lx}" y1="{ly + 24}" x2="{lx + 14}" y2="{ly + 24}" stroke="#c44e52" stroke-width="2"/>')
        out.append(f'<text x="{lx + 20}" y="{ly + 28}">{escape(reference_label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
