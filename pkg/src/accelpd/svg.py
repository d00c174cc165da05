"""Minimal log-log line plots written as SVG text."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["loglog_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
W, H = 720, 460
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 50


def _decades(lo, hi):
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_svg(series: dict, title: str = "", guides: bool = True) -> str:
    """Render ``{name: (t, q)}`` on log-log axes.

    Nonpositive values break the line.  With ``guides`` the reference slopes
    ``t**-1`` and ``t**-2`` are drawn through the first point of the first
    series.
    """
    clean = {}
    for name, (t, q) in series.items():
        t = np.asarray(t, dtype=float)
        q = np.abs(np.asarray(q, dtype=float))
        clean[name] = (t, q)
    pos_t = np.concatenate([t[(t > 0)] for t, _ in clean.values()] or [np.array([1.0, 10.0])])
    pos_q = np.concatenate([q[(q > 0) & np.isfinite(q)] for _, q in clean.values()] or [np.array([1.0])])
    if pos_q.size == 0:
        pos_q = np.array([1e-16, 1.0])
    lx0, lx1 = math.log10(pos_t.min()), math.log10(pos_t.max())
    ly0, ly1 = math.log10(pos_q.min()), math.log10(pos_q.max())
    if lx1 - lx0 < 1e-9:
        lx1 = lx0 + 1
    if ly1 - ly0 < 1e-9:
        ly1 = ly0 + 1
    ly0, ly1 = math.floor(ly0), math.ceil(ly1)
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(t):
        return LEFT + (math.log10(t) - lx0) / (lx1 - lx0) * pw

    def py(q):
        return TOP + (ly1 - math.log10(q)) / (ly1 - ly0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{LEFT}" y="{TOP - 14}" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for d in _decades(lx0, lx1):
        if lx0 - 1e-9 <= d <= lx1 + 1e-9:
            x = px(10.0**d)
            out.append(f'<line x1="{x:.1f}" y1="{TOP}" x2="{x:.1f}" y2="{TOP + ph}" stroke="#ddd"/>')
            out.append(f'<text x="{x:.1f}" y="{TOP + ph + 16}" text-anchor="middle">1e{d}</text>')
    step = max(1, (ly1 - ly0) // 10)
    for d in range(ly0, ly1 + 1, step):
        y = py(10.0**d)
        out.append(f'<line x1="{LEFT}" y1="{y:.1f}" x2="{LEFT + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{H - 12}" text-anchor="middle">t</text>')

    out.append(f'<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>')
    legend = []
    if guides and clean:
        t, q = next(iter(clean.values()))
        ok = (t > 0) & (q > 0)
        if ok.any():
            t_a, q_a = t[ok][0], q[ok][0]
            t_b = 10.0**lx1
            for p, dash in ((1, "6,4"), (2, "2,3")):
                q_b = q_a * (t_b / t_a) ** (-p)
                out.append(
                    f'<line x1="{px(t_a):.1f}" y1="{py(q_a):.1f}" x2="{px(t_b):.1f}" y2="{py(q_b):.1f}" '
                    f'stroke="gray" stroke-dasharray="{dash}" clip-path="url(#plot)"/>'
                )
                legend.append((f"t^-{p}", "gray", dash))
    for k, (name, (t, q)) in enumerate(clean.items()):
        color = _COLORS[k % len(_COLORS)]
        segments, cur = [], []
        for ti, qi in zip(t, q):
            if ti > 0 and qi > 0 and math.isfinite(qi):
                cur.append(f"{px(ti):.2f},{py(qi):.2f}")
            elif cur:
                segments.append(cur)
                cur = []
        if cur:
            segments.append(cur)
        for seg in segments:
            out.append(
                f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" stroke-width="1.5" clip-path="url(#plot)"/>'
            )
        legend.append((name, color, None))
    for k, (name, color, dash) in enumerate(legend):
        y = TOP + 12 + 18 * k
        x = LEFT + pw + 14
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{color}" stroke-width="2"{style}/>')
        out.append(f'<text x="{x + 30}" y="{y + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
