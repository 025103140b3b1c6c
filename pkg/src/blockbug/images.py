"""Stage snapshots as PNG images: plain frames, touching-evidence overlays,
and small thumbnails for graph nodes.

Encoding goes through Pillow with pinned settings so that the same pixel
buffer always yields the same bytes (golden-image tests rely on this).
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .raster import STAGE_H, STAGE_W, xy_to_pixel

THUMB_W = 60
THUMB_H = 45

# non-evidence pixels are blended halfway toward white in overlays
FADE = 0.5

LINE_RGB = (255, 0, 0)


def png_bytes(rgb: np.ndarray) -> bytes:
    image = Image.fromarray(np.ascontiguousarray(rgb), "RGB")
    buf = io.BytesIO()
    image.save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def png_base64(rgb: np.ndarray) -> str:
    return base64.b64encode(png_bytes(rgb)).decode("ascii")


def stage_frame(vm) -> np.ndarray:
    return vm.render().color


def _faded(color: np.ndarray) -> np.ndarray:
    return 255.0 - (255.0 - color.astype(np.float64)) * FADE


def _line_pixels(p_a, p_b) -> tuple[np.ndarray, np.ndarray]:
    """Grid (rows, cols) of the segment between two screen positions."""
    r0, c0 = xy_to_pixel(*p_a)
    r1, c1 = xy_to_pixel(*p_b)
    n = max(abs(r1 - r0), abs(c1 - c0)) + 1
    rows = np.rint(np.linspace(r0, r1, n)).astype(int)
    cols = np.rint(np.linspace(c0, c1, n)).astype(int)
    return rows, cols


def touching_overlay(raster, evidence) -> np.ndarray:
    """Visual form of a touching verdict: the overlap at full strength over a
    faded frame when touching, otherwise a red segment joining the closest
    pixel pair."""
    out = _faded(raster.color)
    if evidence.touched and evidence.mask_a is not None:
        overlap = evidence.mask_a & evidence.mask_b
        out[overlap] = raster.color[overlap]
    elif evidence.p_a is not None and evidence.p_b is not None:
        rows, cols = _line_pixels(evidence.p_a, evidence.p_b)
        for dr, dc in ((0, 0), (0, 1), (1, 0), (0, -1), (-1, 0)):
            rr = np.clip(rows + dr, 0, STAGE_H - 1)
            cc = np.clip(cols + dc, 0, STAGE_W - 1)
            out[rr, cc] = LINE_RGB
    return np.rint(out).astype(np.uint8)


def sprite_thumbnail(color: np.ndarray, x: float, y: float) -> np.ndarray:
    """A 60x45 crop centered on a stage position, shifted to stay on-stage."""
    row, col = xy_to_pixel(x, y)
    r0 = min(max(row - THUMB_H // 2, 0), STAGE_H - THUMB_H)
    c0 = min(max(col - THUMB_W // 2, 0), STAGE_W - THUMB_W)
    return color[r0:r0 + THUMB_H, c0:c0 + THUMB_W]
