"""Minimal deterministic SVG emission: every byte is a pure function of the
data, so output files hash-compare across runs."""

from __future__ import annotations


class SvgCanvas:
    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self._parts: list[str] = []

    def rect(self, x, y, w, h, fill="none", stroke="none", stroke_width=1.0):
        self._parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="{stroke_width:.2f}"/>')

    def line(self, x1, y1, x2, y2, stroke="#888888", stroke_width=0.5):
        self._parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{stroke_width:.2f}"/>')

    def polyline(self, points, stroke="#000000", stroke_width=1.0):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        self._parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{stroke_width:.2f}"/>')

    def circle(self, cx, cy, r, fill="#000000"):
        self._parts.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.2f}" fill="{fill}"/>')

    def text(self, x, y, content, size=9.0, fill="#000000", style=""):
        extra = f' font-style="{style}"' if style else ""
        self._parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size:.1f}" '
            f'font-family="monospace" fill="{fill}"{extra}>'
            f'{escape(content)}</text>')

    def render(self) -> str:
        body = "\n".join(self._parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width:.0f}" height="{self.height:.0f}" '
                f'viewBox="0 0 {self.width:.0f} {self.height:.0f}">\n'
                f"{body}\n</svg>\n")

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def grey_level(label: int, n_labels: int) -> str:
    """Super-class shading: evenly spaced grey levels, light to dark."""
    if n_labels <= 1:
        shade = 230
    else:
        shade = 240 - round(140 * (label - 1) / (n_labels - 1))
    return f"#{shade:02x}{shade:02x}{shade:02x}"
