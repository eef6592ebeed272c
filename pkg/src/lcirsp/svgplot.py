"""Tiny self-contained SVG emitters (line plot, heat map).

No external assets, no timestamps: output bytes depend only on the data, so
seeded experiment reruns produce identical files.
"""

from __future__ import annotations

import math

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == v else "nan"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    t0 = math.ceil(lo / step) * step
    out = []
    t = t0
    while t <= hi + 1e-9:
        out.append(round(t, 10))
        t += step
    return out


def line_plot(series, title="", x_label="", y_label="", width=640, height=420):
    """series: {label: [(x, y), ...]} -> SVG text."""
    margin_l, margin_r, margin_t, margin_b = 64, 16, 36, 48
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return margin_t + ph - (y - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#444"/>',
    ]
    for tx in _ticks(x_lo, x_hi):
        if tx < x_lo or tx > x_hi:
            continue
        parts.append(
            f'<line x1="{px(tx):.1f}" y1="{margin_t + ph}" x2="{px(tx):.1f}" '
            f'y2="{margin_t + ph + 4}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{px(tx):.1f}" y="{margin_t + ph + 18}" '
            f'text-anchor="middle">{_fmt(tx)}</text>'
        )
    for ty in _ticks(y_lo, y_hi):
        if ty < y_lo or ty > y_hi:
            continue
        parts.append(
            f'<line x1="{margin_l - 4}" y1="{py(ty):.1f}" x2="{margin_l}" '
            f'y2="{py(ty):.1f}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{margin_l - 8}" y="{py(ty) + 4:.1f}" '
            f'text-anchor="end">{_fmt(ty)}</text>'
        )
    parts.append(
        f'<text x="{margin_l + pw / 2:.0f}" y="{height - 10}" '
        f'text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{margin_t + ph / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {margin_t + ph / 2:.0f})">{y_label}</text>'
    )
    for k, (label, pts) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = sorted(pts)
        path = " ".join(
            f"{'M' if i == 0 else 'L'}{px(x):.1f},{py(y):.1f}"
            for i, (x, y) in enumerate(pts)
        )
        parts.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>')
        ly = margin_t + 14 + 16 * k
        parts.append(
            f'<line x1="{margin_l + pw - 110}" y1="{ly - 4}" x2="{margin_l + pw - 90}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{margin_l + pw - 84}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _cell_color(v, v_lo=-1.0, v_hi=1.0):
    """Blue (low) -> white (mid) -> red (high)."""
    t = (max(min(v, v_hi), v_lo) - v_lo) / (v_hi - v_lo)
    if t < 0.5:
        f = t / 0.5
        r, g, b = int(59 + f * (255 - 59)), int(76 + f * (255 - 76)), 192
        b = int(192 + f * (255 - 192))
    else:
        f = (t - 0.5) / 0.5
        r = 255
        g, b = int(255 - f * (255 - 76)), int(255 - f * (255 - 60))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(matrix, row_labels, col_labels, title="", cell=56, v_lo=-1.0, v_hi=1.0):
    n_rows, n_cols = len(row_labels), len(col_labels)
    margin_l, margin_t = 84, 56
    width = margin_l + n_cols * cell + 20
    height = margin_t + n_rows * cell + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for j, label in enumerate(col_labels):
        parts.append(
            f'<text x="{margin_l + j * cell + cell / 2:.0f}" y="{margin_t - 8}" '
            f'text-anchor="middle">{label}</text>'
        )
    for i, label in enumerate(row_labels):
        parts.append(
            f'<text x="{margin_l - 8}" y="{margin_t + i * cell + cell / 2 + 4:.0f}" '
            f'text-anchor="end">{label}</text>'
        )
        for j in range(n_cols):
            v = float(matrix[i][j])
            x, y = margin_l + j * cell, margin_t + i * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_cell_color(v, v_lo, v_hi)}" stroke="#888"/>'
            )
            parts.append(
                f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" '
                f'text-anchor="middle">{v:.2f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
