"""Occluder modelling and segmentation-based search for the target behind it."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import ndimage

from . import kernels
from .core import BoundingBox, Frame, MaybeBox, iou
from .depth_model import (BIN_WIDTH, SIGMA_FLOOR, DepthGaussian, box_pixels, fit_gaussian,
                          histogram_of, within_gate)
from .flow import FlowParams, propagate

COLOR_BINS = 16


@dataclass
class OccluderModel:
    depth: DepthGaussian
    color_hist: np.ndarray  # (16, 16, 16), sums to 1
    box: BoundingBox
    target_area_pre: float

    def __post_init__(self):
        if not self.target_area_pre > 0:
            raise ValueError("target_area_pre must be positive")


@dataclass(frozen=True)
class CandidateRegion:
    box: BoundingBox
    area: float
    svm_score: float
    overlap_with_occluder: float


@dataclass
class Region:
    """A segment inside a search ROI."""

    mask: np.ndarray  # bool, ROI coordinates
    offset: tuple[int, int]  # (row, col) of the ROI's top-left pixel in the frame

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    @property
    def box(self) -> BoundingBox:
        rows = np.flatnonzero(self.mask.any(axis=1))
        cols = np.flatnonzero(self.mask.any(axis=0))
        r0, c0 = self.offset
        return BoundingBox(c0 + cols[0], r0 + rows[0], cols[-1] - cols[0] + 1, rows[-1] - rows[0] + 1)


def color_histogram(rgb_pixels) -> np.ndarray:
    px = np.asarray(rgb_pixels, dtype=np.int64).reshape(-1, 3) * COLOR_BINS // 256
    flat = (px[:, 0] * COLOR_BINS + px[:, 1]) * COLOR_BINS + px[:, 2]
    hist = np.bincount(flat, minlength=COLOR_BINS ** 3).astype(np.float64)
    if hist.sum() > 0:
        hist /= hist.sum()
    return hist.reshape(COLOR_BINS, COLOR_BINS, COLOR_BINS)


def _roi_view(frame: Frame, roi: BoundingBox):
    ys, xs = roi.pixel_slices(frame.width, frame.height)
    return ys, xs, (ys.start, xs.start)


def init_occluder(frame: Frame, target_box: BoundingBox, target_g: DepthGaussian,
                  bin_width=BIN_WIDTH, sigma_floor=SIGMA_FLOOR) -> OccluderModel:
    """Model the pixels inside the target box that lie nearer than mu - sigma."""
    ys, xs, (r0, c0) = _roi_view(frame, target_box)
    d = frame.depth[ys, xs]
    mask = (d > 0) & (d < target_g.mu - target_g.sigma)
    if not mask.any():
        raise ValueError("no pixel in the target box is nearer than the target depth model")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    box = BoundingBox(c0 + cols[0], r0 + rows[0], cols[-1] - cols[0] + 1, rows[-1] - rows[0] + 1)
    return OccluderModel(
        depth=fit_gaussian(histogram_of(d[mask], bin_width), sigma_floor),
        color_hist=color_histogram(frame.rgb[ys, xs][mask]),
        box=box,
        target_area_pre=target_box.area,
    )


def track_occluder(prev: Frame, cur: Frame, occ: OccluderModel, flow_params=FlowParams(),
                   bin_width=BIN_WIDTH, sigma_floor=SIGMA_FLOOR, grow=None) -> OccluderModel:
    """Move the occluder box with optical flow (held in place when flow fails)
    and refit its depth over the in-box pixels that still match it.

    With ``grow`` set, the box is also refit to the occluder pixels connected
    to it within the box scaled by ``grow``, so an occluder first seen only
    where it overlapped the target is followed over its full extent.
    """
    res = propagate(prev, cur, occ.box, flow_params)
    box = occ.box if res.box is None else res.box
    box = box.clip(cur.width, cur.height) or occ.box
    if grow is not None:
        box = _refit_box(cur, box, occ.depth, grow) or box
    v = box_pixels(cur.depth, box)
    v = v[(v > 0) & within_gate(v, occ.depth)]
    depth = fit_gaussian(histogram_of(v, bin_width), sigma_floor) if v.size else occ.depth
    return OccluderModel(depth, occ.color_hist, box, occ.target_area_pre)


def _refit_box(frame: Frame, box: BoundingBox, g: DepthGaussian, grow: float) -> MaybeBox:
    region = box.scaled(grow).clip(frame.width, frame.height)
    if region is None:
        return None
    ys, xs = region.pixel_slices(frame.width, frame.height)
    d = frame.depth[ys, xs]
    mask = (d > 0) & within_gate(d, g)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3)))
    if n == 0:
        return None
    # components touching the tracked box
    iy, ix = box.pixel_slices(frame.width, frame.height)
    inner = labels[iy.start - ys.start:iy.stop - ys.start, ix.start - xs.start:ix.stop - xs.start]
    keep = np.unique(inner[inner > 0])
    if keep.size == 0:
        return None
    sel = np.isin(labels, keep)
    rows = np.flatnonzero(sel.any(axis=1))
    cols = np.flatnonzero(sel.any(axis=0))
    return BoundingBox(xs.start + cols[0], ys.start + rows[0], cols[-1] - cols[0] + 1, rows[-1] - rows[0] + 1)


def _regions(labels, offset, min_area) -> list[Region]:
    n = int(labels.max()) + 1 if labels.size else 0
    if n <= 0:
        return []
    sizes = np.bincount(labels[labels >= 0].ravel(), minlength=n)
    return [Region(labels == k, offset) for k in range(n) if sizes[k] >= max(min_area, 1)]


def depth_labels(frame: Frame, roi: BoundingBox, tol=100.0):
    ys, xs, offset = _roi_view(frame, roi)
    d = frame.depth[ys, xs].astype(np.float64)
    return kernels.label_components(d[..., None], d > 0, tol, 4), offset


def color_labels(frame: Frame, roi: BoundingBox, tol=30.0):
    ys, xs, offset = _roi_view(frame, roi)
    rgb = frame.rgb[ys, xs].astype(np.float64)
    return kernels.label_components(rgb, np.ones(rgb.shape[:2], dtype=bool), tol, 8), offset


def segment_depth(frame: Frame, roi: BoundingBox, min_area=0.0, tol=100.0) -> list[Region]:
    """4-connected regions of valid pixels whose neighbors differ by <= tol mm."""
    labels, offset = depth_labels(frame, roi, tol)
    return _regions(labels, offset, min_area)


def segment_rgb(frame: Frame, roi: BoundingBox, min_area=0.0, tol=30.0) -> list[Region]:
    """8-connected regions whose neighbors differ by <= tol in every channel."""
    labels, offset = color_labels(frame, roi, tol)
    return _regions(labels, offset, min_area)


def joint_labels(depth_lab, color_lab):
    """Pixels grouped by (depth region, color region) identity; -1 where depth is invalid."""
    valid = depth_lab >= 0
    out = np.full(depth_lab.shape, -1, dtype=np.int32)
    if not valid.any():
        return out
    key = depth_lab[valid].astype(np.int64) * (int(color_lab.max()) + 1) + color_lab[valid]
    _, first, inv = np.unique(key, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int32)
    rank[np.argsort(first)] = np.arange(first.size, dtype=np.int32)
    out[valid] = rank[inv]
    return out


def segment_joint(frame: Frame, roi: BoundingBox, min_area=0.0, depth_tol=100.0, color_tol=30.0) -> list[Region]:
    dl, offset = depth_labels(frame, roi, depth_tol)
    cl, _ = color_labels(frame, roi, color_tol)
    return _regions(joint_labels(dl, cl), offset, min_area)


def _candidate_order(c: CandidateRegion):
    return (-c.svm_score, c.box.x, c.box.y, c.box.w, c.box.h)


def local_search(frame: Frame, occ: OccluderModel, target_g: DepthGaussian | None,
                 score_box: Callable[[BoundingBox], float], detections: Iterable = (),
                 search_scale=2.0, min_area_ratio=0.05, depth_tol=100.0,
                 color_tol=30.0) -> list[CandidateRegion]:
    """Target candidates around the occluder.

    Joint depth/color segments in the search ROI that do not match the
    occluder depth (nor lie outside the target depth gate, when ``target_g``
    is given) are scored with ``score_box``; detections centered in the ROI
    are added with their own scores.  Identical boxes are merged keeping the
    best score; the list is sorted by score, then left, then top.
    """
    roi = occ.box.scaled(search_scale).clip(frame.width, frame.height)
    found: dict[tuple, CandidateRegion] = {}

    def add(box: BoundingBox, score: float):
        key = tuple(round(v, 6) for v in box.as_tuple())
        cand = CandidateRegion(box, box.area, float(score), iou(box, occ.box))
        if key not in found or found[key].svm_score < cand.svm_score:
            found[key] = cand

    if roi is not None:
        for region in segment_joint(frame, roi, min_area_ratio * occ.target_area_pre, depth_tol, color_tol):
            r0, c0 = region.offset
            ys, xs = np.nonzero(region.mask)
            d = frame.depth[ys + r0, xs + c0]
            med = float(np.median(d))
            if within_gate(med, occ.depth):
                continue
            if target_g is not None and not within_gate(med, target_g):
                continue
            box = region.box
            add(box, score_box(box))
        for det in detections:
            cx, cy = det.box.center
            if roi.x <= cx < roi.x2 and roi.y <= cy < roi.y2:
                add(det.box, det.score)
    return sorted(found.values(), key=_candidate_order)


def try_recover(candidates: Iterable[CandidateRegion], occ: OccluderModel, tau_detect=0.0,
                min_area_ratio=0.5, max_overlap=0.3) -> MaybeBox:
    """Best-scoring candidate that is large enough, clear of the occluder and confidently classified."""
    ok = [c for c in candidates
          if c.area >= min_area_ratio * occ.target_area_pre
          and c.overlap_with_occluder <= max_overlap
          and c.svm_score >= tau_detect]
    if not ok:
        return None
    return min(ok, key=_candidate_order).box
