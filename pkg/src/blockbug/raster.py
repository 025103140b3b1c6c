"""Stage rasterization and pixel-set sensing queries.

Coordinate conventions (normative, see docs/format.md):

- The stage is a 480x360 pixel grid. A stage pixel (row, col) has screen
  coordinates x = col - 240, y = 180 - row, so x ranges over [-240, 239] and
  y over [-179, 180].
- Sprite positions are floats clamped to [-240, 240] x [-180, 180]; when a
  position maps to a pixel it is rounded and clipped into the grid.
- "edge" is the set of boundary pixels of the grid; the mouse pointer is the
  single pixel under the (rounded) mouse position.

Sprites are drawn with nearest-neighbor sampling: scaling by size/100 and
rotation according to rotation style ("all-around" rotates by direction-90
degrees clockwise, "left-right" mirrors when direction < 0, "don't-rotate"
draws as-is). Larger layer numbers draw on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

STAGE_W = 480
STAGE_H = 360
HALF_W = 240
HALF_H = 180


def _half_up(v: float) -> int:
    """Round half away from zero-free: plain floor(v + 0.5). Used everywhere a
    position becomes a pixel so scaling by whole factors stays exact."""
    return int(math.floor(v + 0.5))


def xy_to_pixel(x: float, y: float) -> tuple[int, int]:
    """Screen position to (row, col), rounded and clipped into the grid."""
    col = min(max(_half_up(x) + HALF_W, 0), STAGE_W - 1)
    row = min(max(HALF_H - _half_up(y), 0), STAGE_H - 1)
    return row, col


def pixel_to_xy(row: int, col: int) -> tuple[int, int]:
    return col - HALF_W, HALF_H - row


@dataclass
class StageRaster:
    """Composited stage: final colors, top-most owner ids, per-instance masks."""

    color: np.ndarray  # (360, 480, 3) uint8
    owner: np.ndarray  # (360, 480) int32, top-most instance id
    masks: dict[int, np.ndarray] = field(default_factory=dict)  # id -> bool mask


def _instance_mask_and_colors(inst, costume) -> tuple[np.ndarray, np.ndarray, tuple[int, int, int, int]] | None:
    """Rasterize one instance.

    Returns (mask, colors, (r0, r1, c0, c1)) where mask/colors cover the
    clipped bounding box grid rows r0:r1, cols c0:c1, or None when the
    instance is off-grid or fully transparent.
    """
    src = costume.rgba
    h, w = src.shape[0], src.shape[1]
    ax, ay = costume.anchor
    scale = max(inst.size, 1e-6) / 100.0

    style = inst.rotation_style
    if style == "all-around":
        theta = math.radians(inst.direction - 90.0)
    else:
        theta = 0.0
    mirrored = style == "left-right" and inst.direction < 0

    # Conservative bounding radius around the anchor, in stage pixels.
    reach = math.hypot(max(ax, w - ax) + 1, max(ay, h - ay) + 1) * scale + 2
    r0 = max(int(math.floor(HALF_H - inst.y - reach)), 0)
    r1 = min(int(math.ceil(HALF_H - inst.y + reach)) + 1, STAGE_H)
    c0 = max(int(math.floor(inst.x + HALF_W - reach)), 0)
    c1 = min(int(math.ceil(inst.x + HALF_W + reach)) + 1, STAGE_W)
    if r0 >= r1 or c0 >= c1:
        return None

    rows = np.arange(r0, r1)
    cols = np.arange(c0, c1)
    # Screen offsets of the pixel centers from the instance position.
    dx = (cols - HALF_W)[None, :] - inst.x
    dy = (HALF_H - rows)[:, None] - inst.y
    dx, dy = np.broadcast_arrays(dx, dy)

    # Invert the draw transform: un-rotate (ccw by theta), un-scale, un-mirror.
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    ux = (dx * cos_t - dy * sin_t) / scale
    uy = (dx * sin_t + dy * cos_t) / scale
    if mirrored:
        ux = -ux

    src_c = np.floor(ax + ux + 0.5).astype(np.int64)
    src_r = np.floor(ay - uy + 0.5).astype(np.int64)
    inside = (src_c >= 0) & (src_c < w) & (src_r >= 0) & (src_r < h)
    if not inside.any():
        return None
    src_c = np.clip(src_c, 0, w - 1)
    src_r = np.clip(src_r, 0, h - 1)
    sampled = src[src_r, src_c]  # (rows, cols, 4)
    mask = inside & (sampled[:, :, 3] > 0)
    if not mask.any():
        return None
    return mask, sampled[:, :, :3], (r0, r1, c0, c1)


def render_stage(instances, costume_of, background=(255, 255, 255)) -> StageRaster:
    """Composite the given instances (any iterable of state objects with
    x, y, direction, size, visible, rotation_style, layer, instance_id and
    is_stage attributes) into a StageRaster.

    ``costume_of(inst)`` must return the instance's current CostumeAsset.
    """
    color = np.empty((STAGE_H, STAGE_W, 3), dtype=np.uint8)
    color[:, :] = background
    owner = np.full((STAGE_H, STAGE_W), -1, dtype=np.int32)
    masks: dict[int, np.ndarray] = {}

    stage_inst = next((i for i in instances if i.is_stage), None)
    if stage_inst is not None:
        backdrop = costume_of(stage_inst)
        bh, bw = backdrop.rgba.shape[0], backdrop.rgba.shape[1]
        # Backdrop is centered; with a 480x360 backdrop this fills the grid.
        r_off = (STAGE_H - bh) // 2
        c_off = (STAGE_W - bw) // 2
        sr0, sc0 = max(0, -r_off), max(0, -c_off)
        dr0, dc0 = max(0, r_off), max(0, c_off)
        hh = min(bh - sr0, STAGE_H - dr0)
        ww = min(bw - sc0, STAGE_W - dc0)
        if hh > 0 and ww > 0:
            tile = backdrop.rgba[sr0:sr0 + hh, sc0:sc0 + ww]
            opaque = tile[:, :, 3] > 0
            region = color[dr0:dr0 + hh, dc0:dc0 + ww]
            region[opaque] = tile[:, :, :3][opaque]
            owner[dr0:dr0 + hh, dc0:dc0 + ww][opaque] = stage_inst.instance_id

    sprites = [i for i in instances if not i.is_stage]
    for inst in sprites:
        masks[inst.instance_id] = np.zeros((STAGE_H, STAGE_W), dtype=bool)
    drawable = sorted((i for i in sprites if i.visible),
                      key=lambda i: (i.layer, i.instance_id))
    for inst in drawable:
        out = _instance_mask_and_colors(inst, costume_of(inst))
        if out is None:
            continue
        mask, cols3, (r0, r1, c0, c1) = out
        masks[inst.instance_id][r0:r1, c0:c1] = mask
        region = color[r0:r1, c0:c1]
        region[mask] = cols3[mask]
        owner[r0:r1, c0:c1][mask] = inst.instance_id
    return StageRaster(color=color, owner=owner, masks=masks)


def instance_mask(inst, costume) -> np.ndarray:
    """Full-grid boolean mask of one instance (ignores visibility of others)."""
    out = _instance_mask_and_colors(inst, costume)
    full = np.zeros((STAGE_H, STAGE_W), dtype=bool)
    if out is not None:
        mask, _, (r0, r1, c0, c1) = out
        full[r0:r1, c0:c1] = mask
    return full


def edge_mask() -> np.ndarray:
    m = np.zeros((STAGE_H, STAGE_W), dtype=bool)
    m[0, :] = m[-1, :] = True
    m[:, 0] = m[:, -1] = True
    return m


def mouse_mask(mx: float, my: float) -> np.ndarray:
    m = np.zeros((STAGE_H, STAGE_W), dtype=bool)
    row, col = xy_to_pixel(mx, my)
    m[row, col] = True
    return m


def color_mask(raster_color: np.ndarray, rgb: tuple[int, int, int]) -> np.ndarray:
    """Pixels whose composited color equals rgb exactly (24-bit match)."""
    return (
        (raster_color[:, :, 0] == rgb[0])
        & (raster_color[:, :, 1] == rgb[1])
        & (raster_color[:, :, 2] == rgb[2])
    )


def mask_positions(mask: np.ndarray) -> np.ndarray:
    """(n, 2) array of screen (x, y) coordinates of the mask's pixels."""
    rows, cols = np.nonzero(mask)
    return np.stack([cols - HALF_W, HALF_H - rows], axis=1)


def overlap_positions(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return mask_positions(a & b)


def closest_pair(a: np.ndarray, b: np.ndarray) -> tuple[tuple[int, int], tuple[int, int], float]:
    """The pair of pixels (p_a from mask a, p_b from mask b) with minimal
    Euclidean distance, ties broken by scan order (row-major in a, then the
    nearest-index match in b). Masks must be non-empty and disjoint."""
    pa = mask_positions(a)
    pb = mask_positions(b)
    tree = cKDTree(pb)
    dists, idx = tree.query(pa)
    best = int(np.argmin(dists))
    p_a = (int(pa[best, 0]), int(pa[best, 1]))
    p_b = (int(pb[idx[best], 0]), int(pb[idx[best], 1]))
    return p_a, p_b, float(dists[best])
