"""Minimal static SVG line plots (polylines, axes, legend); no plotting stack."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str = ""
    dashed: bool = False
    width: float = 1.4


@dataclass
class Figure:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 640
    height: int = 480
    equal_aspect: bool = False
    series: list = field(default_factory=list)

    def add(self, x, y, label: str = "", color: str = "", dashed: bool = False, width: float = 1.4):
        if not color:
            color = PALETTE[len(self.series) % len(PALETTE)]
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), label, color, dashed, width))
        return self

    def _limits(self):
        xs = np.concatenate([s.x[np.isfinite(s.x)] for s in self.series] or [np.zeros(1)])
        ys = np.concatenate([s.y[np.isfinite(s.y)] for s in self.series] or [np.zeros(1)])
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        if x1 == x0:
            x0, x1 = x0 - 1.0, x1 + 1.0
        if y1 == y0:
            y0, y1 = y0 - 1.0, y1 + 1.0
        px, py = 0.04 * (x1 - x0), 0.04 * (y1 - y0)
        return x0 - px, x1 + px, y0 - py, y1 + py

    def render(self) -> str:
        W, H = self.width, self.height
        ml, mr, mt, mb = 70, 20, 36, 50
        pw, ph = W - ml - mr, H - mt - mb
        x0, x1, y0, y1 = self._limits()
        if self.equal_aspect:
            sx, sy = pw / (x1 - x0), ph / (y1 - y0)
            s = min(sx, sy)
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1 = cx - pw / (2 * s), cx + pw / (2 * s)
            y0, y1 = cy - ph / (2 * s), cy + ph / (2 * s)

        def X(v):
            return ml + (v - x0) / (x1 - x0) * pw

        def Y(v):
            return mt + (y1 - v) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        ]
        for t in np.linspace(x0, x1, 6):
            out.append(f'<line x1="{X(t):.2f}" y1="{mt + ph}" x2="{X(t):.2f}" y2="{mt + ph + 5}" stroke="#444"/>')
            out.append(f'<text x="{X(t):.2f}" y="{mt + ph + 18}" font-size="11" text-anchor="middle">{t:.3g}</text>')
        for t in np.linspace(y0, y1, 6):
            out.append(f'<line x1="{ml - 5}" y1="{Y(t):.2f}" x2="{ml}" y2="{Y(t):.2f}" stroke="#444"/>')
            out.append(f'<text x="{ml - 8}" y="{Y(t) + 4:.2f}" font-size="11" text-anchor="end">{t:.3g}</text>')
        if self.title:
            out.append(f'<text x="{W / 2:.1f}" y="22" font-size="14" text-anchor="middle">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{ml + pw / 2:.1f}" y="{H - 10}" font-size="12" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(
                f'<text x="16" y="{mt + ph / 2:.1f}" font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(self.ylabel)}</text>'
            )
        out.append(f'<clipPath id="plotarea"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath>')
        for s in self.series:
            ok = np.isfinite(s.x) & np.isfinite(s.y)
            if not ok.any():
                continue
            pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(s.x[ok], s.y[ok]))
            dash = ' stroke-dasharray="5,3"' if s.dashed else ""
            out.append(
                f'<polyline clip-path="url(#plotarea)" fill="none" stroke="{s.color}" '
                f'stroke-width="{s.width}"{dash} points="{pts}"/>'
            )
        ly = mt + 14
        for s in self.series:
            if not s.label:
                continue
            out.append(f'<line x1="{ml + pw - 150}" y1="{ly - 4}" x2="{ml + pw - 128}" y2="{ly - 4}" stroke="{s.color}" stroke-width="2"/>')
            out.append(f'<text x="{ml + pw - 122}" y="{ly}" font-size="11">{escape(s.label)}</text>')
            ly += 15
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())
