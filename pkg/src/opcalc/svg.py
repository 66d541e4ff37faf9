"""Minimal hand-written SVG line plots (polylines, shaded bands, markers)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 50


class Plot:
    def __init__(self, title: str, xlabel: str = "x", ylabel: str = ""):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self._items = []

    def line(self, x, y, color="black", dash=None, label=None):
        self._items.append(("line", np.asarray(x, float), np.asarray(y, float), color, dash, label))

    def band(self, x, lower, upper, color="#9ecae1", label=None):
        self._items.append(("band", np.asarray(x, float), (np.asarray(lower, float), np.asarray(upper, float)), color, None, label))

    def points(self, x, y, color="#444444", label=None):
        self._items.append(("points", np.asarray(x, float), np.asarray(y, float), color, None, label))

    def _limits(self):
        xs, ys = [], []
        for kind, x, y, *_ in self._items:
            xs.append(x)
            ys.extend(y if kind == "band" else [y])
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        x0, x1 = float(x.min()), float(x.max())
        y0, y1 = float(y.min()), float(y.max())
        if x1 == x0:
            x1 = x0 + 1.0
        pad = 0.05 * (y1 - y0 or 1.0)
        return x0, x1, y0 - pad, y1 + pad

    def render(self) -> str:
        x0, x1, y0, y1 = self._limits()

        def sx(x):
            return MARGIN + (np.asarray(x) - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

        def sy(y):
            return HEIGHT - MARGIN - (np.asarray(y) - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

        def pts(x, y):
            return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(x), sy(y)))

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            '<rect width="100%" height="100%" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(self.title)}</text>',
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>',
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(self.xlabel)}</text>',
            f'<text x="14" y="{HEIGHT / 2}" transform="rotate(-90 14 {HEIGHT / 2})" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{escape(self.ylabel)}</text>',
        ]
        for value in np.linspace(y0, y1, 5):
            out.append(
                f'<text x="{MARGIN - 4}" y="{float(sy(value)) + 4:.2f}" text-anchor="end" font-family="sans-serif" '
                f'font-size="10">{value:.3g}</text>'
            )
        legend_y = MARGIN + 14
        for kind, x, y, color, dash, label in self._items:
            if kind == "band":
                lower, upper = y
                poly = pts(np.concatenate((x, x[::-1])), np.concatenate((upper, lower[::-1])))
                out.append(f'<polygon points="{poly}" fill="{color}" fill-opacity="0.5" stroke="none"/>')
            elif kind == "line":
                dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
                out.append(f'<polyline points="{pts(x, y)}" fill="none" stroke="{color}" stroke-width="1.5"{dash_attr}/>')
            else:
                for a, b in zip(sx(x), sy(y)):
                    out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2" fill="{color}"/>')
            if label:
                out.append(
                    f'<text x="{WIDTH - MARGIN - 6}" y="{legend_y}" text-anchor="end" font-family="sans-serif" '
                    f'font-size="11" fill="{color}">{escape(label)}</text>'
                )
                legend_y += 14
        out.append("</svg>")
        return "\n".join(out) + "\n"
