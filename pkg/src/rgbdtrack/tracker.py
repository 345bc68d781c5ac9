"""Per-frame tracking loop: detection + flow fusion, depth gating and
re-centering, online model updates and the occlusion state machine."""
from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import depth_model as dm
from .core import BoundingBox, Frame, MaybeBox, TrackMode, iou
from .detector import (SampleCache, SvmModel, level_scores, sample_negatives, score_windows,
                       train, update)
from .features import FeaturePyramid, FrameChannels, TemplateGeometry, build_pyramid, extract_rgbd_hog
from .flow import FlowParams, FlowResult, propagate
from .occlusion import OccluderModel, init_occluder, local_search, track_occluder, try_recover

log = logging.getLogger(__name__)


@dataclass
class TrackerConfig:
    alpha: float = 0.5
    occ_enter_threshold: float = 0.35
    tau_accept: float = -0.5
    tau_detect: float = 0.0
    recover_area_ratio: float = 0.5
    recover_max_overlap: float = 0.3
    search_scale: float = 2.0
    occluder_grow: float = 1.5  # per-frame growth allowed when refitting the occluder box; 0 disables
    bin_width_mm: float = 50.0
    update_rate: float = 0.2
    sigma_floor_mm: float = 30.0
    gate_sigmas: float = 3.0
    gate_slack_mm: float = 200.0
    recenter_expand: float = 1.4
    min_size_ratio: float = 0.5  # tracked size stays within these factors of the initial size
    max_size_ratio: float = 4.0
    cell_size: int = 8
    hog_bins: int = 9
    min_template_cells: int = 4
    max_template_cells: int = 12
    scale_step: float = 1.1
    pyramid_levels: int = 3
    top_k: int = 5
    nms_threshold: float = 0.5
    svm_c: float = 1.0
    pos_capacity: int = 50
    neg_capacity: int = 200
    init_negatives: int = 20
    init_negative_distance: float = 1.5
    hard_negatives_per_frame: int = 10
    flow_grid: int = 10
    flow_fb_max_px: float = 2.0
    flow_min_survival: float = 0.2
    flow_levels: int = 3
    flow_window: int = 15
    seg_depth_tol_mm: float = 100.0
    seg_color_tol: float = 30.0
    seg_min_area_ratio: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0 < self.occ_enter_threshold < 1:
            raise ValueError("occ_enter_threshold must be in (0, 1)")
        if not 0 < self.update_rate <= 1:
            raise ValueError("update_rate must be in (0, 1]")
        if self.scale_step <= 1:
            raise ValueError("scale_step must be > 1")
        if not 0 < self.min_size_ratio <= 1 <= self.max_size_ratio:
            raise ValueError("need 0 < min_size_ratio <= 1 <= max_size_ratio")

    @property
    def flow_params(self) -> FlowParams:
        return FlowParams(grid=self.flow_grid, fb_max=self.flow_fb_max_px, min_survival=self.flow_min_survival,
                          levels=self.flow_levels, window=self.flow_window)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_text(cls, text: str, source="<config>") -> "TrackerConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in types:
                raise ValueError(f"{source}:{lineno}: unknown or malformed setting {raw.strip()!r}")
            try:
                values[key] = int(value) if types[key] in ("int", int) else float(value)
            except ValueError:
                raise ValueError(f"{source}:{lineno}: bad value for {key}: {value!r}") from None
        return cls(**values)

    @classmethod
    def load(cls, path) -> "TrackerConfig":
        return cls.from_text(Path(path).read_text(), str(path))


class Phase(enum.Enum):
    NORMAL = "normal"
    OCCLUDED = "occluded"


@dataclass
class DepthTrack:
    """Target depth Gaussian plus a depth velocity used to predict the next frame."""

    g: dm.DepthGaussian
    velocity: float = 0.0

    def predicted(self) -> dm.DepthGaussian:
        return dm.DepthGaussian(max(self.g.mu + self.velocity, 1.0), self.g.sigma)

    def correct(self, observed: dm.DepthGaussian, rate: float, sigma_floor: float):
        pred = self.predicted()
        self.g = dm.update_gaussian(pred, observed, rate, sigma_floor)
        self.velocity += rate * (observed.mu - pred.mu)

    def coast(self, rate: float):
        self.g = self.predicted()
        self.velocity *= 1 - rate


@dataclass
class FrameResult:
    index: int
    box: MaybeBox
    confidence: float = float("nan")
    phase: Phase = Phase.NORMAL
    occlusion: float = float("nan")


@dataclass
class TrackerState:
    mode: TrackMode
    config: TrackerConfig
    template: TemplateGeometry
    svm: SvmModel
    cache: SampleCache
    depth: DepthTrack | None
    last_box: BoundingBox
    target_size: tuple[float, float]
    last_frame: Frame
    init_size: tuple[float, float]
    phase: Phase = Phase.NORMAL
    occluder: OccluderModel | None = None
    updates: int = 0


def fuse(c_d: float, c_t: float, det_box: BoundingBox, flow_box: MaybeBox, alpha: float) -> float:
    """Detection confidence raised by agreement with the flow box."""
    r = 0.0 if flow_box is None else iou(det_box, flow_box)
    return c_d + alpha * c_t * r


def _inside(box: BoundingBox, frame: Frame, tol=0.5) -> bool:
    return (box.x >= -tol and box.y >= -tol and box.x2 <= frame.width + tol
            and box.y2 <= frame.height + tol)


def _robust_init_gaussian(depth, box, cfg: TrackerConfig) -> dm.DepthGaussian:
    h = dm.histogram(depth, box, cfg.bin_width_mm)
    if h.total == 0:
        raise ValueError("no valid depth pixel inside the initial box")
    v = dm.box_pixels(depth, box)
    v = v[v > 0].astype(np.float64)
    med = float(np.median(v))
    mad = 1.4826 * float(np.median(np.abs(v - med)))
    seed = dm.DepthGaussian(med, max(mad, cfg.sigma_floor_mm))
    return dm.observe(depth, box, seed, cfg.bin_width_mm, cfg.gate_sigmas, cfg.gate_slack_mm,
                      cfg.sigma_floor_mm) or dm.fit_gaussian(h, cfg.sigma_floor_mm)


def _clamp_size(state: TrackerState, box: BoundingBox) -> tuple[float, float]:
    cfg = state.config
    f = box.w / state.init_size[0]
    f = min(max(f, cfg.min_size_ratio), cfg.max_size_ratio)
    return state.init_size[0] * f, state.init_size[1] * f


def _pyramid(state: TrackerState, frame: Frame, channels: FrameChannels) -> FeaturePyramid:
    cfg = state.config
    s = state.template.width / state.target_size[0]
    start = s * cfg.scale_step ** ((cfg.pyramid_levels - 1) / 2)
    return build_pyramid(frame, cfg.scale_step, state.template, state.mode, start_scale=start,
                         max_levels=cfg.pyramid_levels, bins=cfg.hog_bins, channels=channels,
                         anchor=(state.last_box.x, state.last_box.y))


def init(frame: Frame, box: BoundingBox, mode: TrackMode, config: TrackerConfig | None = None) -> TrackerState:
    cfg = config or TrackerConfig()
    if not _inside(box, frame):
        raise ValueError(f"initial box {box} is outside the {frame.width}x{frame.height} frame")
    depth = None
    if mode.needs_depth_model:
        depth = DepthTrack(_robust_init_gaussian(frame.depth, box, cfg))
    template = TemplateGeometry.for_box(box, cfg.cell_size, cfg.min_template_cells, cfg.max_template_cells)
    channels = FrameChannels.of(frame, mode)
    cache = SampleCache(cfg.pos_capacity, cfg.neg_capacity)
    cache.add_positive(extract_rgbd_hog(frame, box, template, mode, cfg.hog_bins, channels).vector())
    rng = np.random.default_rng(cfg.seed)
    for f in sample_negatives(frame, box, template, mode, cfg.init_negatives, cfg.init_negative_distance,
                              rng, channels):
        cache.add_negative(f)
    if not cache.negatives:
        raise ValueError("frame too small to sample negative windows around the initial box")
    svm = train(cache, cfg.svm_c, template, cfg.seed)
    state = TrackerState(mode, cfg, template, svm, cache, depth, box, (box.w, box.h), frame, (box.w, box.h))
    pyr = _pyramid(state, frame, channels)
    state.svm, state.cache = update(svm, cache, frame, box, pyr, mode, cfg.hard_negatives_per_frame, cfg.seed)
    return state


def _visible_part(frame: Frame, box: BoundingBox, g: dm.DepthGaussian) -> MaybeBox:
    ys, xs = box.pixel_slices(frame.width, frame.height)
    d = frame.depth[ys, xs].astype(np.float64)
    mask = (d > 0) & (np.abs(d - g.mu) <= g.sigma)
    if not mask.any():
        return None
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return BoundingBox(xs.start + cols[0], ys.start + rows[0], cols[-1] - cols[0] + 1, rows[-1] - rows[0] + 1)


def _step_normal(state: TrackerState, frame: Frame, channels: FrameChannels) -> FrameResult:
    cfg, mode = state.config, state.mode
    flow: FlowResult = propagate(state.last_frame, frame, state.last_box, cfg.flow_params)
    pyr = _pyramid(state, frame, channels)
    maps = level_scores(pyr, state.svm)
    dets = score_windows(pyr, state.svm, cfg.top_k, cfg.nms_threshold, maps=maps)
    g_pred = state.depth.predicted() if state.depth is not None else None
    if mode.uses_depth_features:
        dets = dm.gate(dets, frame.depth, g_pred, cfg.gate_sigmas, cfg.gate_slack_mm)

    best, best_c = None, -math.inf
    for d in dets:
        c = fuse(d.score, flow.confidence, d.box, flow.box, cfg.alpha)
        if c > best_c:
            best, best_c = d, c
    accepted = best is not None and best_c >= cfg.tau_accept
    if accepted:
        box = best.box
    elif flow.box is not None:
        box = flow.box
    else:
        box = state.last_box
    if mode.uses_depth_features and accepted:
        box = dm.recenter(box, frame.depth, g_pred, cfg.recenter_expand)
    box = box.shift_inside(frame.width, frame.height)

    occ_value = float("nan")
    if state.depth is not None:
        obs = dm.observe(frame.depth, box, g_pred, cfg.bin_width_mm, cfg.gate_sigmas, cfg.gate_slack_mm,
                         cfg.sigma_floor_mm)
        if mode.handles_occlusion:
            ref = obs or g_pred
            hist = dm.histogram(frame.depth, box, cfg.bin_width_mm)
            if hist.total > 0:
                occ_value = dm.occlusion_likelihood(hist, ref)
            if occ_value > cfg.occ_enter_threshold:
                return _enter_occlusion(state, frame, box, ref, best_c, occ_value)
        if accepted and obs is not None:
            state.depth.correct(obs, cfg.update_rate, cfg.sigma_floor_mm)
        else:
            state.depth.coast(cfg.update_rate)

    if accepted:
        state.svm, state.cache = update(state.svm, state.cache, frame, box, pyr, mode,
                                        cfg.hard_negatives_per_frame, cfg.seed, maps=maps)
        state.target_size = _clamp_size(state, box)
        state.updates += 1
    state.last_box = box
    return FrameResult(frame.index, box.clip(frame.width, frame.height),
                       best_c if best is not None else float("nan"), Phase.NORMAL, occ_value)


def _enter_occlusion(state, frame, box, ref, conf, occ_value) -> FrameResult:
    try:
        occ = init_occluder(frame, box, ref, state.config.bin_width_mm, state.config.sigma_floor_mm)
    except ValueError:
        log.debug("frame %d: occlusion likelihood high but no occluder pixels", frame.index)
        state.last_box = box
        return FrameResult(frame.index, box.clip(frame.width, frame.height), conf, Phase.NORMAL, occ_value)
    state.phase = Phase.OCCLUDED
    state.occluder = occ
    state.depth.velocity = 0.0
    state.last_box = box
    visible = _visible_part(frame, box, ref)
    return FrameResult(frame.index, visible, conf, Phase.OCCLUDED, occ_value)


def _step_occluded(state: TrackerState, frame: Frame, channels: FrameChannels) -> FrameResult:
    cfg, mode = state.config, state.mode
    state.occluder = track_occluder(state.last_frame, frame, state.occluder, cfg.flow_params,
                                    cfg.bin_width_mm, cfg.sigma_floor_mm, cfg.occluder_grow or None)
    pyr = _pyramid(state, frame, channels)
    dets = score_windows(pyr, state.svm, cfg.top_k, cfg.nms_threshold)
    g = state.depth.g
    if mode.uses_depth_features:
        dets = dm.gate(dets, frame.depth, g, cfg.gate_sigmas, cfg.gate_slack_mm)

    def score_box(b: BoundingBox) -> float:
        f = extract_rgbd_hog(frame, b, state.template, mode, cfg.hog_bins, channels)
        return float(state.svm.decision(f.vector()))

    cands = local_search(frame, state.occluder, g, score_box, dets, cfg.search_scale,
                         cfg.seg_min_area_ratio, cfg.seg_depth_tol_mm, cfg.seg_color_tol)
    found = try_recover(cands, state.occluder, cfg.tau_detect, cfg.recover_area_ratio, cfg.recover_max_overlap)
    if found is None:
        return FrameResult(frame.index, None, float("nan"), Phase.OCCLUDED)
    conf = max(c.svm_score for c in cands if c.box == found)
    state.phase = Phase.NORMAL
    state.occluder = None
    state.last_box = found.shift_inside(frame.width, frame.height)
    return FrameResult(frame.index, found.clip(frame.width, frame.height), conf, Phase.NORMAL)


def step(state: TrackerState, frame: Frame) -> tuple[TrackerState, FrameResult]:
    if frame.shape != state.last_frame.shape:
        raise ValueError(f"frame size {frame.shape} differs from the initial frame {state.last_frame.shape}")
    channels = FrameChannels.of(frame, state.mode)
    if state.phase is Phase.NORMAL:
        result = _step_normal(state, frame, channels)
    else:
        result = _step_occluded(state, frame, channels)
    state.last_frame = frame
    return state, result


def track(frames, init_box: BoundingBox, mode: TrackMode, config: TrackerConfig | None = None) -> list[FrameResult]:
    """Run over a whole sequence; the first frame's output is the initial box."""
    frames = iter(frames)
    first = next(frames)
    state = init(first, init_box, mode, config)
    results = [FrameResult(first.index, init_box.clip(first.width, first.height), float("nan"))]
    for frame in frames:
        state, res = step(state, frame)
        results.append(res)
    return results
