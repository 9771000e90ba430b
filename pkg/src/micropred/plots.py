"""Parity plots rendered as standalone SVG text.

The rendering is a plain affine map from data space to the viewport plus a
y = x reference line, written out with fixed float formatting so the same
input always produces byte-identical output.
"""

from __future__ import annotations

from pathlib import Path

from .evaluation import read_parity_csv

__all__ = ["parity_svg", "render_parity_svg", "data_to_view"]

_SUBSET_COLORS = {
    "train": "#7f7f7f",
    "val": "#1f77b4",
    "test": "#d62728",
}
_FALLBACK_COLOR = "#2ca02c"


def data_to_view(value: float, lo: float, hi: float, size: int, margin: int,
                 axis: str) -> float:
    """Affine data -> pixel map; the y axis is flipped (SVG origin is top-left)."""
    span = hi - lo
    frac = (value - lo) / span
    if axis == "x":
        return margin + frac * (size - 2 * margin)
    return size - margin - frac * (size - 2 * margin)


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def parity_svg(rows, size: int = 480, margin: int = 56) -> str:
    """Build SVG text for (sample_id, truth, prediction, subset) rows."""
    if not rows:
        raise ValueError("no parity rows to plot")
    values = [r[1] for r in rows] + [r[2] for r in rows]
    lo, hi = min(values), max(values)
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{size - 2 * margin}" '
        f'height="{size - 2 * margin}" fill="none" stroke="black"/>',
    ]
    x0 = data_to_view(lo, lo, hi, size, margin, "x")
    x1 = data_to_view(hi, lo, hi, size, margin, "x")
    y0 = data_to_view(lo, lo, hi, size, margin, "y")
    y1 = data_to_view(hi, lo, hi, size, margin, "y")
    parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" '
                 f'y2="{_fmt(y1)}" stroke="#888888" stroke-dasharray="4 3"/>')

    seen_subsets = []
    for sid, truth, pred, subset in rows:
        cx = data_to_view(truth, lo, hi, size, margin, "x")
        cy = data_to_view(pred, lo, hi, size, margin, "y")
        color = _SUBSET_COLORS.get(subset, _FALLBACK_COLOR)
        if subset not in seen_subsets:
            seen_subsets.append(subset)
        parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" '
                     f'fill="{color}" fill-opacity="0.7">'
                     f'<title>{sid}</title></circle>')

    parts.append(f'<text x="{size // 2}" y="{size - margin // 4}" '
                 f'text-anchor="middle" font-size="13">truth</text>')
    parts.append(f'<text x="{margin // 4}" y="{size // 2}" '
                 f'text-anchor="middle" font-size="13" '
                 f'transform="rotate(-90 {margin // 4} {size // 2})">'
                 f'prediction</text>')
    parts.append(f'<text x="{margin}" y="{size - margin + 16}" '
                 f'text-anchor="middle" font-size="11">{_fmt(lo)}</text>')
    parts.append(f'<text x="{size - margin}" y="{size - margin + 16}" '
                 f'text-anchor="middle" font-size="11">{_fmt(hi)}</text>')
    for pos, subset in enumerate(seen_subsets):
        color = _SUBSET_COLORS.get(subset, _FALLBACK_COLOR)
        yy = margin + 14 + 16 * pos
        parts.append(f'<circle cx="{margin + 12}" cy="{yy}" r="3" '
                     f'fill="{color}"/>')
        parts.append(f'<text x="{margin + 20}" y="{yy + 4}" '
                     f'font-size="11">{subset}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_parity_svg(parity_csv, out_path, size: int = 480,
                      margin: int = 56) -> None:
    rows = read_parity_csv(parity_csv)
    Path(out_path).write_text(parity_svg(rows, size, margin), encoding="utf-8")
