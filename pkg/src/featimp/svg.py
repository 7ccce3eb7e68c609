"""Standalone SVG bar charts for importance results (no external assets)."""

from __future__ import annotations

import numpy as np

_BAR_H = 22
_GAP = 8
_LEFT = 120
_RIGHT = 40
_TOP = 34
_BOTTOM = 40
_PLOT_W = 520


def _esc(s):
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def render_svg(rows, path, title="feature importance"):
    """Write a horizontal bar chart of per-feature importance.

    rows: dataframe-like with columns feature, importance and optionally
    conf_lower / conf_upper; finite bounds are drawn as whiskers. Bars are
    sorted by importance, negative values extend left of the zero line.
    """
    feats = list(rows["feature"])
    imp = np.asarray(rows["importance"], dtype=np.float64)
    if len(feats) == 0:
        raise ValueError("nothing to plot: no feature rows")
    has_ci = "conf_lower" in rows and "conf_upper" in rows
    lo = np.asarray(rows["conf_lower"], dtype=np.float64) if has_ci else np.full(len(feats), np.nan)
    hi = np.asarray(rows["conf_upper"], dtype=np.float64) if has_ci else np.full(len(feats), np.nan)

    order = np.argsort(-imp, kind="stable")
    feats = [feats[i] for i in order]
    imp, lo, hi = imp[order], lo[order], hi[order]

    finite = np.concatenate([imp, lo[np.isfinite(lo)], hi[np.isfinite(hi)]])
    vmin = min(0.0, float(finite.min()))
    vmax = max(0.0, float(finite.max()))
    if vmax == vmin:
        vmax = vmin + 1.0
    pad = 0.05 * (vmax - vmin)
    vmin, vmax = vmin - pad, vmax + pad

    def sx(v):
        return _LEFT + (v - vmin) / (vmax - vmin) * _PLOT_W

    height = _TOP + len(feats) * (_BAR_H + _GAP) + _BOTTOM
    width = _LEFT + _PLOT_W + _RIGHT
    zero_x = sx(0.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{_LEFT}" y="18" font-size="14">{_esc(title)}</text>',
        f'<line class="zero" x1="{zero_x:.2f}" y1="{_TOP - 6}" x2="{zero_x:.2f}" '
        f'y2="{height - _BOTTOM + 6}" stroke="#444" stroke-width="1"/>',
    ]
    for i, f in enumerate(feats):
        y = _TOP + i * (_BAR_H + _GAP)
        x0, x1 = sorted((zero_x, sx(imp[i])))
        parts.append(f'<text x="{_LEFT - 8}" y="{y + _BAR_H * 0.72:.1f}" '
                     f'text-anchor="end">{_esc(f)}</text>')
        parts.append(f'<rect class="bar" x="{x0:.2f}" y="{y}" '
                     f'width="{max(x1 - x0, 0.5):.2f}" height="{_BAR_H}" '
                     f'fill="#4878a8"/>')
        if np.isfinite(lo[i]) and np.isfinite(hi[i]):
            cy = y + _BAR_H / 2
            parts.append(f'<line class="whisker" x1="{sx(lo[i]):.2f}" y1="{cy:.1f}" '
                         f'x2="{sx(hi[i]):.2f}" y2="{cy:.1f}" stroke="#222" '
                         f'stroke-width="1.5"/>')
            for xv in (lo[i], hi[i]):
                parts.append(f'<line class="whisker-cap" x1="{sx(xv):.2f}" '
                             f'y1="{cy - 5:.1f}" x2="{sx(xv):.2f}" y2="{cy + 5:.1f}" '
                             f'stroke="#222" stroke-width="1.5"/>')
    axis_y = height - _BOTTOM + 14
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = vmin + frac * (vmax - vmin)
        parts.append(f'<text x="{sx(v):.1f}" y="{axis_y}" text-anchor="middle" '
                     f'font-size="10">{v:.3g}</text>')
    parts.append(f'<text x="{_LEFT + _PLOT_W / 2:.0f}" y="{height - 8}" '
                 f'text-anchor="middle">importance</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
    return path
