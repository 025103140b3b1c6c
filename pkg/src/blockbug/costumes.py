"""Costume assets: simple filled shapes or inline RGBA bitmaps.

Costumes rasterize to small RGBA numpy arrays at load time; the stage
compositor only ever sees pixels, never shape descriptions. The anchor is the
pixel of the bitmap that sits at the instance's (x, y) position.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass

import numpy as np

from .errors import ProjectFormatError


@dataclass(frozen=True)
class CostumeAsset:
    name: str
    rgba: np.ndarray  # (height, width, 4) uint8
    anchor: tuple[int, int]  # (ax, ay) pixel offset from the top-left corner
    shape: str | None = None  # "rect" | "ellipse" when shape-defined
    color: tuple[int, int, int] | None = None

    def __eq__(self, other):  # numpy arrays don't support dataclass ==
        return (
            isinstance(other, CostumeAsset)
            and self.name == other.name
            and self.anchor == other.anchor
            and self.shape == other.shape
            and self.color == other.color
            and self.rgba.shape == other.rgba.shape
            and bool(np.array_equal(self.rgba, other.rgba))
        )

    @property
    def width(self) -> int:
        return int(self.rgba.shape[1])

    @property
    def height(self) -> int:
        return int(self.rgba.shape[0])


def rasterize_shape(shape: str, width: int, height: int,
                    color: tuple[int, int, int]) -> np.ndarray:
    if width <= 0 or height <= 0:
        raise ProjectFormatError(f"costume dimensions must be positive, got {width}x{height}")
    rgba = np.zeros((height, width, 4), dtype=np.uint8)
    if shape == "rect":
        rgba[:, :, 0] = color[0]
        rgba[:, :, 1] = color[1]
        rgba[:, :, 2] = color[2]
        rgba[:, :, 3] = 255
    elif shape == "ellipse":
        # Pixel centers inside the inscribed ellipse are opaque.
        ys = (np.arange(height) + 0.5 - height / 2.0) / (height / 2.0)
        xs = (np.arange(width) + 0.5 - width / 2.0) / (width / 2.0)
        inside = (ys[:, None] ** 2 + xs[None, :] ** 2) <= 1.0
        rgba[inside, 0] = color[0]
        rgba[inside, 1] = color[1]
        rgba[inside, 2] = color[2]
        rgba[inside, 3] = 255
    else:
        raise ProjectFormatError(f"unknown costume shape: {shape!r}")
    return rgba


def costume_from_json(doc: dict) -> CostumeAsset:
    from .model import parse_color  # local import to avoid a cycle

    name = doc.get("name", "")
    width = int(doc.get("width", 0))
    height = int(doc.get("height", 0))
    if "shape" in doc:
        color = parse_color(doc.get("color", "#000000"), f"costume {name}")
        rgba = rasterize_shape(doc["shape"], width, height, color)
        shape = doc["shape"]
    elif "rgba" in doc:
        try:
            raw = base64.b64decode(doc["rgba"], validate=True)
        except (binascii.Error, ValueError) as e:
            raise ProjectFormatError(f"costume {name}: bad base64 bitmap: {e}")
        if len(raw) != width * height * 4:
            raise ProjectFormatError(
                f"costume {name}: bitmap is {len(raw)} bytes, "
                f"expected {width * height * 4} for {width}x{height} RGBA"
            )
        rgba = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 4).copy()
        shape = None
        color = None
    else:
        raise ProjectFormatError(f"costume {name}: needs either 'shape' or 'rgba'")
    anchor_doc = doc.get("anchor")
    if anchor_doc is not None:
        anchor = (int(anchor_doc[0]), int(anchor_doc[1]))
        if not (0 <= anchor[0] < width and 0 <= anchor[1] < height):
            raise ProjectFormatError(f"costume {name}: anchor {anchor} outside bitmap")
    else:
        anchor = (width // 2, height // 2)
    return CostumeAsset(name=name, rgba=rgba, anchor=anchor, shape=shape,
                        color=color if shape else None)


def costume_to_json(c: CostumeAsset) -> dict:
    doc: dict = {"name": c.name, "width": c.width, "height": c.height,
                 "anchor": [c.anchor[0], c.anchor[1]]}
    if c.shape is not None:
        doc["shape"] = c.shape
        from .model import color_to_hex

        doc["color"] = color_to_hex(c.color)
    else:
        doc["rgba"] = base64.b64encode(c.rgba.tobytes()).decode("ascii")
    return doc
