"""Target depth distribution: histograms, Gaussian fit, occlusion likelihood,
depth gating and re-centering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import MAX_DEPTH_MM, BoundingBox

BIN_WIDTH = 50.0
SIGMA_FLOOR = 30.0


@dataclass(frozen=True)
class DepthHistogram:
    bin_width: float
    counts: np.ndarray  # counts[i] covers [i * bin_width, (i + 1) * bin_width)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(len(self.counts)) + 0.5) * self.bin_width


@dataclass(frozen=True)
class DepthGaussian:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"depth mean must be positive, got {self.mu}")
        if not self.sigma > 0:
            raise ValueError(f"depth spread must be positive, got {self.sigma}")


def histogram_of(values, bin_width=BIN_WIDTH) -> DepthHistogram:
    v = np.asarray(values).ravel()
    v = v[v > 0].astype(np.float64)
    nbins = int(np.ceil((MAX_DEPTH_MM + 1) / bin_width))
    idx = np.minimum((v // bin_width).astype(np.int64), nbins - 1)
    return DepthHistogram(float(bin_width), np.bincount(idx, minlength=nbins))


def box_pixels(depth, box: BoundingBox) -> np.ndarray:
    h, w = depth.shape
    ys, xs = box.pixel_slices(w, h)
    return np.asarray(depth)[ys, xs]


def histogram(depth, box: BoundingBox, bin_width=BIN_WIDTH) -> DepthHistogram:
    """Counts of valid (non-zero) depth pixels inside the box."""
    return histogram_of(box_pixels(depth, box), bin_width)


def fit_gaussian(h: DepthHistogram, sigma_floor=SIGMA_FLOOR) -> DepthGaussian:
    total = h.total
    if total == 0:
        raise ValueError("cannot fit a depth Gaussian to an empty histogram")
    c = h.centers
    p = h.counts / total
    mu = float(p @ c)
    var = float(p @ (c - mu) ** 2)
    return DepthGaussian(mu, max(float(np.sqrt(var)), sigma_floor))


def occlusion_likelihood(h: DepthHistogram, g: DepthGaussian) -> float:
    """Share of pixels in bins whose center lies strictly nearer than mu - sigma."""
    total = h.total
    if total == 0:
        raise ValueError("occlusion likelihood is undefined for an empty histogram")
    near = h.centers < g.mu - g.sigma
    return float(h.counts[near].sum() / total)


def within_gate(d, g: DepthGaussian, n_sigma=3.0, slack=200.0):
    return np.abs(np.asarray(d, dtype=np.float64) - g.mu) <= n_sigma * g.sigma + slack


def median_depth(depth, box: BoundingBox) -> float | None:
    v = box_pixels(depth, box)
    v = v[v > 0]
    return float(np.median(v)) if v.size else None


def gate(candidates, depth, g: DepthGaussian | None, n_sigma=3.0, slack=200.0):
    """Drop candidates whose median box depth is far from the target model.

    Boxes without valid depth are kept; ``g=None`` (depth disabled) keeps all.
    """
    if g is None:
        return list(candidates)
    out = []
    for c in candidates:
        m = median_depth(depth, c.box)
        if m is None or within_gate(m, g, n_sigma, slack):
            out.append(c)
    return out


def observe(depth, box: BoundingBox, g: DepthGaussian, bin_width=BIN_WIDTH, n_sigma=3.0, slack=200.0,
            sigma_floor=SIGMA_FLOOR) -> DepthGaussian | None:
    """Gaussian fit over the box pixels that agree with the current model.

    Pixels outside the gate (occluders in front, background behind) are left
    out; None when no pixel agrees.
    """
    v = box_pixels(depth, box)
    v = v[(v > 0) & within_gate(v, g, n_sigma, slack)]
    if v.size == 0:
        return None
    return fit_gaussian(histogram_of(v, bin_width), sigma_floor)


def recenter(box: BoundingBox, depth, g: DepthGaussian, expand=1.4) -> BoundingBox:
    """Move the box (size unchanged) onto the centroid of the largest connected
    region, inside the expanded box, whose depth lies within sigma of mu."""
    depth = np.asarray(depth)
    h, w = depth.shape
    region = box.scaled(expand).clip(w, h)
    if region is None:
        return box
    ys, xs = region.pixel_slices(w, h)
    d = depth[ys, xs].astype(np.float64)
    mask = (d > 0) & (np.abs(d - g.mu) <= g.sigma)
    if not mask.any():
        return box
    labels, n = ndimage.label(mask)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    sizes[0] = 0
    best = int(np.argmax(sizes))
    rr, cc = np.nonzero(labels == best)
    cy = ys.start + rr.mean() + 0.5
    cx = xs.start + cc.mean() + 0.5
    return BoundingBox.from_center(cx, cy, box.w, box.h).shift_inside(w, h)


def update_gaussian(g: DepthGaussian, observed: DepthGaussian, rate=0.2, sigma_floor=SIGMA_FLOOR) -> DepthGaussian:
    if not 0 < rate <= 1:
        raise ValueError("update rate must be in (0, 1]")
    mu = (1 - rate) * g.mu + rate * observed.mu
    sigma = (1 - rate) * g.sigma + rate * observed.sigma
    return DepthGaussian(mu, max(sigma, sigma_floor))
