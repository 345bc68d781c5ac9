"""Box propagation by pyramidal Lucas-Kanade point tracking with forward-backward checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .core import BoundingBox, Frame, MaybeBox


@dataclass(frozen=True)
class FlowParams:
    grid: int = 10
    fb_max: float = 2.0  # px, forward-backward round-trip tolerance
    fb_scale: float = 2.0  # px, confidence decay length
    min_survival: float = 0.2
    levels: int = 3  # downsampled levels above full resolution
    window: int = 15
    patch: int = 11  # NCC patch side
    min_ncc: float = 0.5
    min_scale: float = 0.9
    max_scale: float = 1.1


@dataclass(frozen=True)
class FlowResult:
    box: MaybeBox
    confidence: float
    displacement: tuple[float, float]


FAILED = FlowResult(None, 0.0, (0.0, 0.0))


def _gray(frame: Frame):
    return cv2.cvtColor(np.ascontiguousarray(frame.rgb), cv2.COLOR_RGB2GRAY)


def _ncc(g0, g1, p0, p1, side):
    """Normalized cross-correlation of the patches around each point pair."""
    out = np.empty(len(p0))
    for k, (a, b) in enumerate(zip(p0, p1)):
        u = cv2.getRectSubPix(g0, (side, side), (float(a[0]), float(a[1]))).astype(np.float64).ravel()
        v = cv2.getRectSubPix(g1, (side, side), (float(b[0]), float(b[1]))).astype(np.float64).ravel()
        u -= u.mean()
        v -= v.mean()
        den = math.sqrt(float(u @ u) * float(v @ v))
        out[k] = float(u @ v) / den if den > 1e-9 else (1.0 if not u.any() and not v.any() else 0.0)
    return out


def flow_confidence(survival: float, median_fb: float, fb_scale=2.0) -> float:
    return float(np.clip(survival * math.exp(-median_fb / fb_scale), 0.0, 1.0))


def propagate(prev: Frame, cur: Frame, prev_box: BoundingBox, params: FlowParams = FlowParams()) -> FlowResult:
    n = params.grid
    u = (np.arange(n) + 0.5) / n
    xs = prev_box.x + u * prev_box.w
    ys = prev_box.y + u * prev_box.h
    pts = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 1, 2).astype(np.float32)
    inside = ((pts[:, 0, 0] >= 0) & (pts[:, 0, 0] <= prev.width - 1)
              & (pts[:, 0, 1] >= 0) & (pts[:, 0, 1] <= prev.height - 1))
    pts = pts[inside]
    total = n * n
    if len(pts) == 0:
        return FAILED

    g0, g1 = _gray(prev), _gray(cur)
    lk = dict(winSize=(params.window, params.window), maxLevel=params.levels,
              criteria=(cv2.TERM_CRITERIA_EPS | cv2.TERM_CRITERIA_COUNT, 30, 0.01))
    fwd, st1, _ = cv2.calcOpticalFlowPyrLK(g0, g1, pts, None, **lk)
    back, st2, _ = cv2.calcOpticalFlowPyrLK(g1, g0, fwd, None, **lk)
    fb = np.linalg.norm((back - pts).reshape(-1, 2), axis=1)
    ok = (st1.ravel() == 1) & (st2.ravel() == 1) & np.isfinite(fb) & (fb <= params.fb_max)
    # round-trip consistency alone passes some points on unrelated content; require appearance agreement too
    if ok.any():
        idx = np.flatnonzero(ok)
        ncc = _ncc(g0, g1, pts[idx, 0], fwd[idx, 0], params.patch)
        ok[idx[ncc < params.min_ncc]] = False
    survival = ok.sum() / total
    if survival < params.min_survival or ok.sum() < 2:
        return FAILED

    p0 = pts[ok].reshape(-1, 2).astype(np.float64)
    p1 = fwd[ok].reshape(-1, 2).astype(np.float64)
    d = np.median(p1 - p0, axis=0)
    i, j = np.triu_indices(len(p0), k=1)
    d0 = np.linalg.norm(p0[i] - p0[j], axis=1)
    d1 = np.linalg.norm(p1[i] - p1[j], axis=1)
    keep = d0 > 1e-6
    scale = float(np.median(d1[keep] / d0[keep])) if keep.any() else 1.0
    scale = min(max(scale, params.min_scale), params.max_scale)

    cx, cy = prev_box.center
    box = BoundingBox.from_center(cx + d[0], cy + d[1], prev_box.w * scale, prev_box.h * scale)
    conf = flow_confidence(survival, float(np.median(fb[ok])), params.fb_scale)
    return FlowResult(box, conf, (float(d[0]), float(d[1])))
