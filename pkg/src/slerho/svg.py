"""Minimal SVG line/scatter plots with no plotting dependency."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Figure"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


@dataclass
class Figure:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 480
    height: int = 360
    equal_aspect: bool = False
    _series: list = field(default_factory=list)

    def line(self, x, y, label: str = "", dashed: bool = False):
        self._series.append(("line", np.asarray(x, float), np.asarray(y, float), label, dashed))
        return self

    def scatter(self, x, y, label: str = "", yerr=None):
        err = None if yerr is None else np.asarray(yerr, float)
        self._series.append(("scatter", np.asarray(x, float), np.asarray(y, float), label, err))
        return self

    def _bounds(self):
        xs = np.concatenate([s[1] for s in self._series])
        ys = np.concatenate([s[2] for s in self._series])
        for s in self._series:
            if s[0] == "scatter" and s[4] is not None:
                ys = np.concatenate([ys, s[2] + s[4], s[2] - s[4]])
        finite = np.isfinite(xs)
        x0, x1 = xs[finite].min(), xs[finite].max()
        finite = np.isfinite(ys)
        y0, y1 = ys[finite].min(), ys[finite].max()
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
        return x0, x1, y0, y1

    def render(self) -> str:
        m = 50
        w, h = self.width, self.height
        x0, x1, y0, y1 = self._bounds() if self._series else (0, 1, 0, 1)
        sx = (w - 2 * m) / (x1 - x0)
        sy = (h - 2 * m) / (y1 - y0)
        if self.equal_aspect:
            sx = sy = min(sx, sy)

        def px(x):
            return m + (x - x0) * sx

        def py(y):
            return h - m - (y - y0) * sy

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
            f'<rect width="{w}" height="{h}" fill="white"/>',
            f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
            f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
            f'<text x="{w / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{escape(self.title)}</text>',
            f'<text x="{w / 2}" y="{h - 12}" text-anchor="middle" font-size="12">{escape(self.xlabel)}</text>',
            f'<text x="14" y="{h / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {h / 2})">{escape(self.ylabel)}</text>',
            f'<text x="{m}" y="{h - m + 16}" font-size="10">{x0:.3g}</text>',
            f'<text x="{w - m}" y="{h - m + 16}" font-size="10" text-anchor="end">{x1:.3g}</text>',
            f'<text x="{m - 4}" y="{h - m}" font-size="10" text-anchor="end">{y0:.3g}</text>',
            f'<text x="{m - 4}" y="{m + 10}" font-size="10" text-anchor="end">{y1:.3g}</text>',
        ]
        for k, s in enumerate(self._series):
            color = PALETTE[k % len(PALETTE)]
            kind, x, y, label = s[:4]
            ok = np.isfinite(x) & np.isfinite(y)
            if kind == "line":
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
                dash = ' stroke-dasharray="5,3"' if s[4] else ""
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"{dash}/>')
            else:
                err = s[4]
                for i in np.flatnonzero(ok):
                    if err is not None:
                        out.append(
                            f'<line x1="{px(x[i]):.2f}" y1="{py(y[i] - err[i]):.2f}" x2="{px(x[i]):.2f}" '
                            f'y2="{py(y[i] + err[i]):.2f}" stroke="{color}"/>'
                        )
                    out.append(f'<circle cx="{px(x[i]):.2f}" cy="{py(y[i]):.2f}" r="3" fill="{color}"/>')
            if label:
                out.append(
                    f'<text x="{w - m - 4}" y="{m + 14 * (k + 1)}" font-size="11" fill="{color}" '
                    f'text-anchor="end">{escape(label)}</text>'
                )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())
