"""Rasterized test phantoms: parallel tubes, stenosed tubes, rectangles.

All phantoms are built from axis-aligned rectangles laid out in millimeters
on the scanner FOV; per-pixel values are exact partial-volume area
fractions of the rectangle/pixel intersection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Phantom", "make_phantom"]


@dataclass
class Phantom:
    """Nonnegative concentration map on the (W, H) scanner grid."""

    concentration: np.ndarray  # (H, W) real, >= 0
    description: str

    def __post_init__(self):
        self.concentration = np.asarray(self.concentration, dtype=np.float64)
        if np.any(self.concentration < 0):
            raise ValueError("concentration must be nonnegative")

    def vector(self) -> np.ndarray:
        return self.concentration.reshape(-1)


def _rect_coverage(grid, fov_mm, cx, cy, width, height):
    """Exact per-pixel covered-area fraction of an axis-aligned rectangle.

    Rectangle center (cx, cy) in mm relative to the FOV center.
    """
    w, h = grid
    fx, fy = fov_mm
    if (abs(cx) + width / 2.0 > fx / 2.0 + 1e-12) or (abs(cy) + height / 2.0 > fy / 2.0 + 1e-12):
        raise ValueError(
            f"rectangle (center=({cx},{cy}), size=({width},{height}) mm) extends outside the {fx}x{fy} mm FOV"
        )
    dx, dy = fx / w, fy / h
    x0, x1 = cx - width / 2.0 + fx / 2.0, cx + width / 2.0 + fx / 2.0
    y0, y1 = cy - height / 2.0 + fy / 2.0, cy + height / 2.0 + fy / 2.0
    px = np.arange(w) * dx
    py = np.arange(h) * dy
    ox = np.clip(np.minimum(x1, px + dx) - np.maximum(x0, px), 0.0, dx)
    oy = np.clip(np.minimum(y1, py + dy) - np.maximum(y0, py), 0.0, dy)
    return np.outer(oy, ox) / (dx * dy)  # (H, W)


def make_phantom(kind: str, grid, fov_mm, **geometry) -> Phantom:
    """Build a phantom of the given kind.

    Kinds:
      ``rect``     one rectangle; default spans the full FOV.
                   params: center_mm=(0,0), size_mm=(fov_x, fov_y), value=1.
      ``tubes``    two vertical tubes.
                   params: length_mm=22, widths_mm=(6, 4), spacing_mm=10,
                   value=1. Spacing is the gap between inner edges.
      ``stenosis`` two vertical tubes, the second with a central narrowed
                   section. params: lengths_mm=(23, 21), widths_mm=(4, 4),
                   stenosis_length_mm=5, stenosis_width_mm=2, spacing_mm=6.
      ``delta``    a single filled voxel. params: voxel=(ix, iy).
    """
    w, h = grid
    fx, fy = fov_mm
    img = np.zeros((h, w))

    if kind == "rect":
        cx, cy = geometry.get("center_mm", (0.0, 0.0))
        size = geometry.get("size_mm", (fx, fy))
        value = geometry.get("value", 1.0)
        img = value * _rect_coverage(grid, fov_mm, cx, cy, size[0], size[1])
        desc = f"rect {size[0]}x{size[1]} mm"

    elif kind == "tubes":
        length = geometry.get("length_mm", 22.0)
        widths = geometry.get("widths_mm", (6.0, 4.0))
        spacing = geometry.get("spacing_mm", 10.0)
        value = geometry.get("value", 1.0)
        # tubes placed symmetrically about the FOV center
        left_cx = -(spacing / 2.0 + widths[0] / 2.0)
        right_cx = spacing / 2.0 + widths[1] / 2.0
        img = value * (
            _rect_coverage(grid, fov_mm, left_cx, 0.0, widths[0], length)
            + _rect_coverage(grid, fov_mm, right_cx, 0.0, widths[1], length)
        )
        desc = f"two {length} mm tubes, widths {widths} mm, spacing {spacing} mm"

    elif kind == "stenosis":
        lengths = geometry.get("lengths_mm", (23.0, 21.0))
        widths = geometry.get("widths_mm", (4.0, 4.0))
        sten_len = geometry.get("stenosis_length_mm", 5.0)
        sten_w = geometry.get("stenosis_width_mm", 2.0)
        spacing = geometry.get("spacing_mm", 6.0)
        value = geometry.get("value", 1.0)
        left_cx = -(spacing / 2.0 + widths[0] / 2.0)
        right_cx = spacing / 2.0 + widths[1] / 2.0
        img = value * _rect_coverage(grid, fov_mm, left_cx, 0.0, widths[0], lengths[0])
        # stenosed tube: wide end segments and a narrow central segment
        end_len = (lengths[1] - sten_len) / 2.0
        if end_len < 0:
            raise ValueError("stenosis longer than the tube")
        off = (sten_len + end_len) / 2.0
        img += value * _rect_coverage(grid, fov_mm, right_cx, -off, widths[1], end_len)
        img += value * _rect_coverage(grid, fov_mm, right_cx, +off, widths[1], end_len)
        img += value * _rect_coverage(grid, fov_mm, right_cx, 0.0, sten_w, sten_len)
        desc = f"tube pair with {sten_len} mm stenosis"

    elif kind == "delta":
        ix, iy = geometry.get("voxel", (w // 2, h // 2))
        if not (0 <= ix < w and 0 <= iy < h):
            raise ValueError(f"delta voxel ({ix},{iy}) outside the {w}x{h} grid")
        img[iy, ix] = geometry.get("value", 1.0)
        desc = f"delta at ({ix},{iy})"

    else:
        raise ValueError(f"unknown phantom kind {kind!r}")

    return Phantom(img, desc)
