"""Linear SVM over RGBD HOG windows: training, sliding-window scoring, hard negatives."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import BoundingBox, Frame, TrackMode, iou
from .features import FeaturePyramid, TemplateGeometry, extract_rgbd_hog


@dataclass
class SvmModel:
    weights: np.ndarray  # flattened (cells_y, cells_x, 2 * bins)
    bias: float
    template: TemplateGeometry
    C: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.size % (self.template.cells_y * self.template.cells_x):
            raise ValueError("weight vector does not match the template geometry")

    @classmethod
    def zeros(cls, template: TemplateGeometry, bins=9, C=1.0) -> "SvmModel":
        return cls(np.zeros(template.cells_y * template.cells_x * bins * 2), 0.0, template, C)

    @property
    def weight_grid(self) -> np.ndarray:
        t = self.template
        return self.weights.reshape(t.cells_y, t.cells_x, -1)

    def decision(self, features) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    level: int = -1
    iy: int = -1
    ix: int = -1


@dataclass
class SampleCache:
    """Bounded positive / hard-negative feature stores, evicting oldest first."""

    pos_capacity: int = 50
    neg_capacity: int = 200
    positives: deque = field(init=False)
    negatives: deque = field(init=False)

    def __post_init__(self):
        self.positives = deque(maxlen=self.pos_capacity)
        self.negatives = deque(maxlen=self.neg_capacity)

    def add_positive(self, f):
        self.positives.append(np.asarray(f, dtype=np.float64).ravel())

    def add_negative(self, f):
        self.negatives.append(np.asarray(f, dtype=np.float64).ravel())

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.array(list(self.positives) + list(self.negatives))
        y = np.concatenate([np.ones(len(self.positives)), -np.ones(len(self.negatives))])
        return X, y


def _class_weights(y, C):
    """Per-sample hinge weight: each class contributes C/2 in total."""
    pos = y > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    return np.where(pos, C / (2.0 * max(n_pos, 1)), C / (2.0 * max(n_neg, 1)))


def hinge_objective(weights, bias, X, y, C=1.0) -> float:
    """0.5 * (|w|^2 + b^2) + C * (mean positive hinge + mean negative hinge) / 2.

    The bias is regularized like a weight (it is trained as a constant
    feature).  Per-class means make the objective invariant to duplicating
    the training set.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    hinge = np.maximum(0.0, 1.0 - y * (X @ weights + bias))
    return 0.5 * (float(weights @ weights) + bias * bias) + float(_class_weights(y, C) @ hinge)


def train_arrays(X, y, template: TemplateGeometry, C=1.0, seed=0, tol=1e-6, max_passes=2000) -> SvmModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training needs at least one positive and one negative sample")
    if C <= 0:
        raise ValueError("C must be positive")
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    rng = np.random.default_rng(seed)
    orders = rng.permuted(np.tile(np.arange(len(y), dtype=np.int64), (max_passes, 1)), axis=1)
    w, _ = kernels.svm_dual_cd(Xa, y, _class_weights(y, C), orders, tol)
    return SvmModel(w[:-1].copy(), float(w[-1]), template, C)


def train(cache: SampleCache, C=1.0, template: TemplateGeometry | None = None, seed=0) -> SvmModel:
    if not cache.positives or not cache.negatives:
        raise ValueError("training needs at least one positive and one negative sample "
                         f"(have {len(cache.positives)} / {len(cache.negatives)})")
    X, y = cache.arrays()
    if template is None:
        raise ValueError("template geometry required")
    return train_arrays(X, y, template, C, seed)


def level_scores(pyramid: FeaturePyramid, model: SvmModel) -> list[np.ndarray]:
    """Raw SVM margin of every window position, one map per level."""
    wg = model.weight_grid
    return [kernels.score_map(lv.stacked, wg) + model.bias for lv in pyramid.levels]


def _ranked_windows(pyramid, maps):
    entries = []
    for li, m in enumerate(maps):
        if m.size == 0:
            continue
        iy, ix = np.indices(m.shape)
        entries.append(np.column_stack([m.ravel(), np.full(m.size, li), iy.ravel(), ix.ravel()]))
    if not entries:
        return np.zeros((0, 4))
    e = np.vstack(entries)
    order = np.lexsort((e[:, 3], e[:, 2], e[:, 1], -e[:, 0]))
    return e[order]


def nms(detections: list[Detection], threshold=0.5, limit=None) -> list[Detection]:
    """Greedy suppression; input must be sorted best first."""
    kept: list[Detection] = []
    for d in detections:
        if all(iou(d.box, k.box) <= threshold for k in kept):
            kept.append(d)
            if limit is not None and len(kept) >= limit:
                break
    return kept


def _iter_detections(pyramid, ranked):
    t = pyramid.template
    for score, li, iy, ix in ranked:
        li, iy, ix = int(li), int(iy), int(ix)
        yield Detection(pyramid.levels[li].window_box(iy, ix, t), float(score), li, iy, ix)


def score_windows(pyramid: FeaturePyramid, model: SvmModel, top_k=5, nms_threshold=0.5,
                  maps: list[np.ndarray] | None = None) -> list[Detection]:
    """Top-k windows over all levels after greedy non-maximum suppression."""
    if len(pyramid) == 0:
        return []
    if maps is None:
        maps = level_scores(pyramid, model)
    return nms(_iter_detections(pyramid, _ranked_windows(pyramid, maps)), nms_threshold, top_k)


def window_feature(pyramid: FeaturePyramid, det: Detection) -> np.ndarray:
    return pyramid.levels[det.level].window_feature(det.iy, det.ix, pyramid.template)


def mine_hard_negatives(pyramid: FeaturePyramid, model: SvmModel, accepted_box: BoundingBox,
                        margin=-1.0, max_overlap=0.3, limit=10,
                        maps: list[np.ndarray] | None = None) -> list[Detection]:
    """Windows scoring above ``margin`` that overlap the target by less than ``max_overlap``."""
    if len(pyramid) == 0:
        return []
    if maps is None:
        maps = level_scores(pyramid, model)
    ranked = _ranked_windows(pyramid, maps)
    ranked = ranked[ranked[:, 0] > margin]
    far = (d for d in _iter_detections(pyramid, ranked) if iou(d.box, accepted_box) < max_overlap)
    return nms(far, 0.5, limit)


def update(model: SvmModel, cache: SampleCache, frame: Frame, accepted_box: BoundingBox,
           pyramid: FeaturePyramid, mode: TrackMode = TrackMode.RGBD, hard_limit=10, seed=0,
           maps: list[np.ndarray] | None = None) -> tuple[SvmModel, SampleCache]:
    """Add the accepted box as a positive, mine hard negatives, retrain.

    The cache is modified in place and returned alongside the new model.
    """
    pos = extract_rgbd_hog(frame, accepted_box, model.template, mode, channels=pyramid.channels)
    cache.add_positive(pos.vector())
    for d in mine_hard_negatives(pyramid, model, accepted_box, limit=hard_limit, maps=maps):
        cache.add_negative(window_feature(pyramid, d))
    return train(cache, model.C, model.template, seed), cache


def sample_negatives(frame: Frame, box: BoundingBox, template: TemplateGeometry, mode: TrackMode,
                     count=20, min_distance=1.5, rng=None, channels=None) -> list[np.ndarray]:
    """Features of same-size windows whose centers lie at least
    ``min_distance * box.w`` away from the box center."""
    rng = np.random.default_rng(0) if rng is None else rng
    cx, cy = box.center
    w, h = min(box.w, frame.width), min(box.h, frame.height)
    out = []
    for _ in range(count * 50):
        if len(out) >= count:
            break
        x = rng.uniform(0, frame.width - w)
        y = rng.uniform(0, frame.height - h)
        if np.hypot(x + w / 2 - cx, y + h / 2 - cy) < min_distance * box.w:
            continue
        out.append(extract_rgbd_hog(frame, BoundingBox(x, y, w, h), template, mode,
                                    channels=channels).vector())
    return out
