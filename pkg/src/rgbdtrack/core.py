"""Geometric and image value types shared by every module.

Boxes use the half-open convention: a box covers [x, x + w) x [y, y + h).
An absent box (target fully occluded, or no tracker output) is ``None``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

MAX_DEPTH_MM = 10000


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box coordinate in {self!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def scaled(self, factor: float) -> "BoundingBox":
        """Same center, both sides multiplied by ``factor``."""
        cx, cy = self.center
        return BoundingBox.from_center(cx, cy, self.w * factor, self.h * factor)

    def clip(self, width: int, height: int) -> Optional["BoundingBox"]:
        """Intersection with the image rectangle; None if nothing is left."""
        x1, y1 = max(self.x, 0.0), max(self.y, 0.0)
        x2, y2 = min(self.x2, float(width)), min(self.y2, float(height))
        if x2 - x1 <= 0 or y2 - y1 <= 0:
            return None
        return BoundingBox(x1, y1, x2 - x1, y2 - y1)

    def shift_inside(self, width: int, height: int) -> "BoundingBox":
        """Translate (without resizing, unless larger than the image) to lie inside."""
        w, h = min(self.w, float(width)), min(self.h, float(height))
        x = min(max(self.x, 0.0), width - w)
        y = min(max(self.y, 0.0), height - h)
        return BoundingBox(x, y, w, h)

    def pixel_slices(self, width: int, height: int) -> tuple[slice, slice]:
        """Row/column slices of the integer pixels whose centers fall in the box."""
        x1 = int(np.clip(math.ceil(self.x - 0.5), 0, width))
        x2 = int(np.clip(math.ceil(self.x2 - 0.5), 0, width))
        y1 = int(np.clip(math.ceil(self.y - 0.5), 0, height))
        y2 = int(np.clip(math.ceil(self.y2 - 0.5), 0, height))
        return slice(y1, y2), slice(x1, x2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


MaybeBox = Optional[BoundingBox]


def intersect_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def union_area(a: BoundingBox, b: BoundingBox) -> float:
    return a.area + b.area - intersect_area(a, b)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    return intersect_area(a, b) / union_area(a, b)


class TrackMode(enum.Enum):
    RGB = "rgb"
    RGBD = "rgbd"
    RGBOCC = "rgbocc"
    RGBDOCC = "rgbdocc"

    @property
    def uses_depth_features(self) -> bool:
        """Depth HOG channel, depth gating and re-centering."""
        return self in (TrackMode.RGBD, TrackMode.RGBDOCC)

    @property
    def handles_occlusion(self) -> bool:
        return self in (TrackMode.RGBOCC, TrackMode.RGBDOCC)

    @property
    def needs_depth_model(self) -> bool:
        return self.uses_depth_features or self.handles_occlusion

    @classmethod
    def parse(cls, text: str) -> "TrackMode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown track mode {text!r} (expected one of {names})") from None


@dataclass(frozen=True, eq=False)
class Frame:
    """An RGB image with its aligned depth map (millimeters, 0 = no return)."""

    rgb: np.ndarray
    depth: np.ndarray
    index: int = 0

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        depth = np.asarray(self.depth)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(f"rgb must be HxWx3, got shape {rgb.shape}")
        if depth.shape != rgb.shape[:2]:
            raise ValueError(f"depth shape {depth.shape} does not match rgb {rgb.shape[:2]}")
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        rgb = rgb.astype(np.uint8, copy=False)
        depth = np.clip(depth, 0, MAX_DEPTH_MM).astype(np.uint16)
        rgb.setflags(write=False)
        depth.setflags(write=False)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rgb.shape[:2]
