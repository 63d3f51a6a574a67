from pathlib import Path
from typing import Dict, Sequence
import logging
import math

from jinja2 import Template

from catenoid_lab.core.exceptions import StorageError

logger = logging.getLogger(__name__)

WIDTH = 640
HEIGHT = 400
PAD = 56
COLORS = ["#2563eb", "#dc2626", "#16a34a", "#9333ea", "#ea580c", "#0891b2"]

SVG_TEMPLATE = """<svg xmlns="http://www.w3.org/2000/svg" width="{{ width }}" height="{{ height }}" viewBox="0 0 {{ width }} {{ height }}">
  <rect width="{{ width }}" height="{{ height }}" fill="white"/>
  <text x="{{ width / 2 }}" y="24" text-anchor="middle" font-family="Arial, sans-serif" font-size="16">{{ title }}</text>
  <line x1="{{ pad }}" y1="{{ height - pad }}" x2="{{ width - pad }}" y2="{{ height - pad }}" stroke="#333"/>
  <line x1="{{ pad }}" y1="{{ pad }}" x2="{{ pad }}" y2="{{ height - pad }}" stroke="#333"/>
  <text x="{{ width / 2 }}" y="{{ height - 16 }}" text-anchor="middle" font-family="Arial, sans-serif" font-size="12">{{ x_label }}</text>
  <text x="{{ pad }}" y="{{ height - pad + 16 }}" text-anchor="middle" font-family="Arial, sans-serif" font-size="10">{{ x_min }}</text>
  <text x="{{ width - pad }}" y="{{ height - pad + 16 }}" text-anchor="middle" font-family="Arial, sans-serif" font-size="10">{{ x_max }}</text>
  <text x="{{ pad - 6 }}" y="{{ height - pad }}" text-anchor="end" font-family="Arial, sans-serif" font-size="10">{{ y_min }}</text>
  <text x="{{ pad - 6 }}" y="{{ pad + 4 }}" text-anchor="end" font-family="Arial, sans-serif" font-size="10">{{ y_max }}</text>
  {% for series in series_list %}
  <polyline fill="none" stroke="{{ series.color }}" stroke-width="1.5" points="{{ series.points }}"/>
  <text x="{{ width - pad - 4 }}" y="{{ pad + 14 * loop.index }}" text-anchor="end" font-family="Arial, sans-serif" font-size="11" fill="{{ series.color }}">{{ series.name }}</text>
  {% endfor %}
</svg>
"""


def _finite_pairs(x: Sequence[float], y: Sequence[float]):
    return [(a, b) for a, b in zip(x, y) if math.isfinite(a) and math.isfinite(b)]


def render_line_plot(
    path,
    title: str,
    x: Sequence[float],
    series: Dict[str, Sequence[float]],
    x_label: str = "t",
) -> Path:
    """
    Write a static SVG line plot; non-finite samples are skipped.
    """
    pairs = {name: _finite_pairs(x, y) for name, y in series.items()}
    xs = [a for values in pairs.values() for a, _ in values] or [0.0, 1.0]
    ys = [b for values in pairs.values() for _, b in values] or [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def to_px(a, b):
        px = PAD + (a - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * PAD)
        py = HEIGHT - PAD - (b - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * PAD)
        return f"{px:.2f},{py:.2f}"

    series_list = [
        {"name": name, "color": COLORS[i % len(COLORS)], "points": " ".join(to_px(a, b) for a, b in values)}
        for i, (name, values) in enumerate(pairs.items())
    ]
    content = Template(SVG_TEMPLATE).render(
        width=WIDTH,
        height=HEIGHT,
        pad=PAD,
        title=title,
        x_label=x_label,
        x_min=f"{x_lo:.3g}",
        x_max=f"{x_hi:.3g}",
        y_min=f"{y_lo:.3g}",
        y_max=f"{y_hi:.3g}",
        series_list=series_list,
    )

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
    except OSError as e:
        raise StorageError(f"Failed to write plot {path}: {e}")
    logger.debug(f"Plot written to {path}")
    return path
