"""RGBD HOG features and scale pyramids.

Depth enters as a second gray image.  Each cell carries ``bins`` unsigned
orientation bins for the RGB image followed by ``bins`` for the depth image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import MAX_DEPTH_MM, BoundingBox, Frame, TrackMode

CELL_SIZE = 8
BINS = 9
CLIP = 0.2
EPS = 1e-6
CONTEXT_CELLS = 2


def depth_to_gray(depth):
    """Linear map of [0, 10000] mm to [0, 255], rounding halves up; 0 stays 0."""
    d = np.clip(np.asarray(depth, dtype=np.int64), 0, MAX_DEPTH_MM)
    return ((d * 510 + MAX_DEPTH_MM) // (2 * MAX_DEPTH_MM)).astype(np.uint8)


def normalize_cells(hist, clip=CLIP, eps=EPS):
    """L2-Hys normalization over 2x2-cell blocks, averaged back onto cells.

    Every block is L2 normalized, clipped at ``clip`` and renormalized; a
    cell's descriptor is the mean of its slices in the blocks that contain it.
    """
    hist = np.asarray(hist, dtype=np.float64)
    cy, cx, _ = hist.shape
    blocks = np.stack([hist[:-1, :-1], hist[:-1, 1:], hist[1:, :-1], hist[1:, 1:]])
    norm = np.sqrt((blocks ** 2).sum(axis=(0, 3), keepdims=True) + eps ** 2)
    blocks = np.minimum(blocks / norm, clip)
    norm = np.sqrt((blocks ** 2).sum(axis=(0, 3), keepdims=True) + eps ** 2)
    blocks = blocks / norm
    out = np.zeros_like(hist)
    count = np.zeros((cy, cx, 1))
    for k, (sy, sx) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        out[sy:sy + cy - 1, sx:sx + cx - 1] += blocks[k]
        count[sy:sy + cy - 1, sx:sx + cx - 1] += 1
    return out / count


def compute_hog(image, cell_size=CELL_SIZE, bins=BINS, valid=None):
    """Block-normalized HOG grid of shape (H // cell_size, W // cell_size, bins).

    ``image`` is HxW (gray) or HxWxC; with several channels the gradient of
    the strongest channel is used per pixel.  Pixels flagged False in
    ``valid`` (and their neighbors' differences across them) carry no energy.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w = img.shape[:2]
    if h < 2 * cell_size or w < 2 * cell_size:
        raise ValueError(f"image {w}x{h} too small for HOG with {cell_size}px cells (need 2x2 cells)")
    hist = kernels.cell_histograms(img, valid, cell_size, bins)
    return normalize_cells(hist)


def resample(img, x0, y0, sx, sy, out_w, out_h):
    """Bilinear resampling with edge replication.

    Output pixel (i, j) reads the source at
    (x0 + (j + 0.5) / sx - 0.5, y0 + (i + 0.5) / sy - 0.5).
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    xs = np.clip(x0 + (np.arange(out_w) + 0.5) / sx - 0.5, 0.0, w - 1.0)
    ys = np.clip(y0 + (np.arange(out_h) + 0.5) / sy - 0.5, 0.0, h - 1.0)
    if img.ndim == 2:
        return kernels.bilinear(img[..., None], xs, ys)[..., 0]
    return kernels.bilinear(img, xs, ys)


@dataclass(frozen=True)
class TemplateGeometry:
    cells_y: int
    cells_x: int
    cell_size: int = CELL_SIZE

    @property
    def width(self) -> int:
        return self.cells_x * self.cell_size

    @property
    def height(self) -> int:
        return self.cells_y * self.cell_size

    @classmethod
    def for_box(cls, box: BoundingBox, cell_size=CELL_SIZE, min_cells=4, max_cells=12):
        """Cell grid closest to the box size, aspect kept, each side in [min, max] cells."""
        nx, ny = box.w / cell_size, box.h / cell_size
        s = 1.0
        if max(nx, ny) > max_cells:
            s = max_cells / max(nx, ny)
        if min(nx, ny) * s < min_cells:
            s = min_cells / min(nx, ny)

        def snap(v):
            return int(min(max(math.floor(v * s + 0.5), min_cells), max_cells))

        return cls(snap(ny), snap(nx), cell_size)


@dataclass
class RgbdHogGrid:
    rgb: np.ndarray
    depth: np.ndarray

    def __post_init__(self):
        if self.rgb.shape != self.depth.shape:
            raise ValueError(f"rgb grid {self.rgb.shape} and depth grid {self.depth.shape} differ")

    @property
    def cells(self) -> tuple[int, int]:
        return self.rgb.shape[:2]

    @property
    def stacked(self) -> np.ndarray:
        """(cells_y, cells_x, 2 * bins): RGB bins then depth bins per cell."""
        return np.concatenate([self.rgb, self.depth], axis=2)

    def vector(self) -> np.ndarray:
        return self.stacked.ravel()


@dataclass
class FrameChannels:
    """Float images a frame contributes to feature extraction."""

    rgb: np.ndarray
    depth_gray: np.ndarray | None
    depth_valid: np.ndarray | None

    @classmethod
    def of(cls, frame: Frame, mode: TrackMode) -> "FrameChannels":
        rgb = frame.rgb.astype(np.float64)
        if not mode.uses_depth_features:
            return cls(rgb, None, None)
        return cls(rgb, depth_to_gray(frame.depth).astype(np.float64), (frame.depth > 0).astype(np.float64))

    def hog(self, x0, y0, sx, sy, out_w, out_h, cell_size=CELL_SIZE, bins=BINS,
            context=CONTEXT_CELLS) -> RgbdHogGrid:
        """HOG of the resampled window, computed with ``context`` extra cells
        sampled on every side (then dropped) so block normalization and
        gradients at the window edge see real neighbors."""
        m = context * cell_size
        args = (x0 - m / sx, y0 - m / sy, sx, sy, out_w + 2 * m, out_h + 2 * m)
        crop = (slice(context, -context or None), slice(context, -context or None))
        rgb_hog = compute_hog(resample(self.rgb, *args), cell_size, bins)[crop]
        if self.depth_gray is None:
            return RgbdHogGrid(rgb_hog, np.zeros_like(rgb_hog))
        gray = resample(self.depth_gray, *args)
        valid = resample(self.depth_valid, *args) >= 1.0 - 1e-9
        return RgbdHogGrid(rgb_hog, compute_hog(gray, cell_size, bins, valid=valid)[crop])


def extract_rgbd_hog(frame: Frame, region: BoundingBox, template: TemplateGeometry,
                     mode: TrackMode, bins=BINS, channels: FrameChannels | None = None) -> RgbdHogGrid:
    """RGBD HOG of ``region`` resampled onto the template grid.

    Context around the region is sampled exactly as a pyramid level samples
    it, so the result equals the pyramid window feature at the same box.
    """
    if region.clip(frame.width, frame.height) is None:
        raise ValueError(f"region {region} does not overlap the {frame.width}x{frame.height} frame")
    if channels is None:
        channels = FrameChannels.of(frame, mode)
    sx = template.width / region.w
    sy = template.height / region.h
    return channels.hog(region.x, region.y, sx, sy, template.width, template.height, template.cell_size, bins)


@dataclass
class PyramidLevel:
    scale: float
    grid: RgbdHogGrid
    image_size: tuple[int, int]  # (width, height) of the resampled image
    origin: tuple[float, float] = (0.0, 0.0)  # frame position of the grid's top-left corner
    _stacked: np.ndarray | None = field(default=None, repr=False)

    @property
    def stacked(self) -> np.ndarray:
        if self._stacked is None:
            self._stacked = self.grid.stacked
        return self._stacked

    def window_box(self, iy: int, ix: int, template: TemplateGeometry) -> BoundingBox:
        cs = template.cell_size
        return BoundingBox(self.origin[0] + ix * cs / self.scale, self.origin[1] + iy * cs / self.scale,
                           template.width / self.scale, template.height / self.scale)

    def window_feature(self, iy: int, ix: int, template: TemplateGeometry) -> np.ndarray:
        return self.stacked[iy:iy + template.cells_y, ix:ix + template.cells_x].ravel()


@dataclass
class FeaturePyramid:
    levels: list[PyramidLevel]
    scale_step: float
    template: TemplateGeometry
    channels: FrameChannels | None = None

    def __len__(self):
        return len(self.levels)


def build_pyramid(frame: Frame, scale_step: float, template: TemplateGeometry, mode: TrackMode,
                  start_scale: float = 1.0, max_levels: int | None = None, bins=BINS,
                  channels: FrameChannels | None = None, anchor=(0.0, 0.0)) -> FeaturePyramid:
    """HOG grids of the frame at scales start_scale * scale_step**-k.

    Every level's cell grid passes through ``anchor`` (frame coordinates),
    so a window can sit exactly on a box placed there.  Stops once the scaled
    frame is smaller than the template (or after ``max_levels``); a frame
    smaller than the template gives an empty pyramid.
    """
    if scale_step <= 1.0:
        raise ValueError("scale_step must be > 1")
    if channels is None:
        channels = FrameChannels.of(frame, mode)
    cs = template.cell_size
    levels = []
    k = 0
    while max_levels is None or k < max_levels:
        s = start_scale * scale_step ** (-k)
        w, h = int(round(frame.width * s)), int(round(frame.height * s))
        if w < template.width or h < template.height:
            break
        ox, oy = (anchor[0] * s) % cs, (anchor[1] * s) % cs
        gw, gh = int(w - ox), int(h - oy)
        if gw >= max(2 * cs, template.width) and gh >= max(2 * cs, template.height):
            grid = channels.hog(ox / s, oy / s, s, s, gw, gh, cs, bins)
            levels.append(PyramidLevel(s, grid, (w, h), (ox / s, oy / s)))
        k += 1
    return FeaturePyramid(levels, scale_step, template, channels)
