"""Synthetic RGBD sequences with exact ground truth.

A textured target moves over a cluttered far background; an optional nearer
occluder slides across it following a cover-fraction schedule.  Ground truth
is the bounding box of the visible target pixels, absent when none are left.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .core import MAX_DEPTH_MM, BoundingBox, Frame, MaybeBox
from .sequence import atomic_write_text, write_sequence


@dataclass
class TargetSpec:
    x: float = 136.0
    y: float = 96.0
    w: int = 48
    h: int = 48
    depth_mm: float = 3000.0
    depth_slope_mm: float = 0.0  # left-to-right depth change across the target
    vx: float = 0.0  # px / frame, bouncing off the canvas border
    vy: float = 0.0
    depth_velocity_mm: float = 0.0  # mm / frame, negative = approaching
    perspective: bool = False  # scale size with depth_mm / current depth
    color: tuple = (200, 60, 50)
    texture_seed: int = 1
    crossfade_seed: int | None = None  # texture blended towards this one over the sequence


@dataclass
class OccluderSpec:
    w: int = 72
    h: int = 72
    depth_mm: float = 1200.0
    color: tuple = (40, 90, 200)
    texture_seed: int = 2
    # (frame, fraction) keyframes, linearly interpolated.  Fractions <= 0 park
    # the occluder beside the target, 1 covers it fully; after the first full
    # cover the occluder leaves on the far side.
    cover_schedule: list = field(default_factory=list)


@dataclass
class ScenarioSpec:
    width: int = 320
    height: int = 240
    frames: int = 100
    seed: int = 0
    background_depth_mm: float = 7000.0
    clutter: int = 12
    depth_noise_mm: float = 10.0
    hole_probability: float = 0.01
    target: TargetSpec = field(default_factory=TargetSpec)
    occluder: OccluderSpec | None = None

    def validate(self):
        errors = []
        if self.width < 32 or self.height < 32:
            errors.append("width/height: canvas must be at least 32x32")
        if self.frames < 1:
            errors.append("frames: must be >= 1")
        if self.depth_noise_mm < 0:
            errors.append("depth_noise_mm: must be >= 0")
        if not 0 <= self.hole_probability < 1:
            errors.append("hole_probability: must be in [0, 1)")
        t = self.target
        if t.w < 1 or t.h < 1:
            errors.append("target.w/h: must be positive")
        if t.x < 0 or t.y < 0 or t.x + t.w > self.width or t.y + t.h > self.height:
            errors.append("target.x/y: initial target must lie inside the canvas")
        near_t, far_t = self.target_depth_range()
        if near_t <= 0:
            errors.append("target.depth_mm: target depth must stay positive")
        if far_t >= self.background_depth_mm:
            errors.append("background_depth_mm: background must be farther than the target")
        if self.background_depth_mm > MAX_DEPTH_MM:
            errors.append(f"background_depth_mm: must be <= {MAX_DEPTH_MM}")
        if t.perspective:
            lo = min(self.target_depth_at(0), self.target_depth_at(self.frames - 1))
            if t.w * t.depth_mm / lo > self.width or t.h * t.depth_mm / lo > self.height:
                errors.append("target.depth_velocity_mm: target outgrows the canvas")
        o = self.occluder
        if o is not None:
            if o.w < t.w or o.h < t.h:
                errors.append("occluder.w/h: occluder must be at least as large as the target")
            if o.depth_mm <= 0 or o.depth_mm >= near_t:
                errors.append("occluder.depth_mm: occluder must be nearer than the target")
            frames = [k[0] for k in o.cover_schedule]
            if frames != sorted(frames) or len(set(frames)) != len(frames):
                errors.append("occluder.cover_schedule: keyframes must be strictly increasing")
            if any(k[1] > 1 for k in o.cover_schedule):
                errors.append("occluder.cover_schedule: fractions must be <= 1")
        if errors:
            raise ValueError("invalid scenario: " + "; ".join(errors))

    def target_depth_at(self, i: int) -> float:
        return self.target.depth_mm + self.target.depth_velocity_mm * i

    def target_depth_range(self) -> tuple[float, float]:
        d = [self.target_depth_at(0), self.target_depth_at(self.frames - 1)]
        half = abs(self.target.depth_slope_mm) / 2
        return min(d) - half, max(d) + half

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"invalid scenario: unknown fields {sorted(unknown)}")
        target = dict(d.pop("target", {}))
        if "color" in target:
            target["color"] = tuple(target["color"])
        occ = d.pop("occluder", None)
        if occ is not None:
            occ = dict(occ)
            if "color" in occ:
                occ["color"] = tuple(occ["color"])
            occ = OccluderSpec(**occ)
        return cls(target=TargetSpec(**target), occluder=occ, **d)

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path):
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")


def make_texture(w: int, h: int, color, seed: int) -> np.ndarray:
    """Blocky multi-scale pattern around a base color; strong edges for HOG and flow."""
    rng = np.random.default_rng(seed)
    base = np.array(color, dtype=np.float64)
    tex = np.empty((h, w, 3))
    tex[:] = base
    for _ in range(max(4, (w * h) // 120)):
        rw, rh = rng.integers(3, max(4, w // 2)), rng.integers(3, max(4, h // 2))
        x0, y0 = rng.integers(-rw // 2, w), rng.integers(-rh // 2, h)
        shade = base + rng.normal(0, 55, 3)
        tex[max(y0, 0):max(y0 + rh, 0), max(x0, 0):max(x0 + rw, 0)] = shade
    tex = cv2.GaussianBlur(tex, (3, 3), 0.8)
    return np.clip(tex, 0, 255)


def make_background(spec: ScenarioSpec, rng) -> np.ndarray:
    h, w = spec.height, spec.width
    low = rng.uniform(60, 190, (max(h // 40, 2), max(w // 40, 2), 3))
    bg = cv2.resize(low, (w, h), interpolation=cv2.INTER_CUBIC)
    bg += rng.normal(0, 6, bg.shape)
    for _ in range(spec.clutter):
        rw, rh = int(rng.integers(6, 40)), int(rng.integers(6, 40))
        x0, y0 = int(rng.integers(0, w - rw)), int(rng.integers(0, h - rh))
        bg[y0:y0 + rh, x0:x0 + rw] = rng.uniform(30, 230, 3)
    return np.clip(cv2.GaussianBlur(bg, (3, 3), 0.8), 0, 255)


def target_track(spec: ScenarioSpec) -> list[tuple[int, int, int, int]]:
    """Integer (x, y, w, h) of the full target in every frame."""
    t = spec.target
    out = []
    x, y, vx, vy = float(t.x), float(t.y), t.vx, t.vy
    for i in range(spec.frames):
        s = t.depth_mm / spec.target_depth_at(i) if t.perspective else 1.0
        w, h = max(1, int(round(t.w * s))), max(1, int(round(t.h * s)))
        if i > 0:
            cx, cy = x + vx, y + vy
            if cx < 0 or cx + w > spec.width:
                vx = -vx
                cx = x + vx
            if cy < 0 or cy + h > spec.height:
                vy = -vy
                cy = y + vy
            x, y = cx, cy
        if t.perspective:
            # grow about the initial center
            cx0, cy0 = t.x + t.w / 2, t.y + t.h / 2
            x, y = cx0 - w / 2, cy0 - h / 2
        xi = int(min(max(round(x), 0), spec.width - w))
        yi = int(min(max(round(y), 0), spec.height - h))
        out.append((xi, yi, w, h))
    return out


def cover_fraction(schedule, i: int) -> float:
    if not schedule:
        return -math.inf
    fr = [k[0] for k in schedule]
    vals = [k[1] for k in schedule]
    return float(np.interp(i, fr, vals))


def occluder_track(spec: ScenarioSpec, targets) -> list[tuple[int, int, int, int] | None]:
    o = spec.occluder
    if o is None:
        return [None] * spec.frames
    fracs = [cover_fraction(o.cover_schedule, i) for i in range(spec.frames)]
    full = [i for i, f in enumerate(fracs) if f >= 1.0]
    first_full, last_full = (full[0], full[-1]) if full else (None, None)
    out = []
    for i, f in enumerate(fracs):
        tx, ty, tw, th = targets[i]
        oy = int(round(ty + th / 2 - o.h / 2))
        if first_full is None or i < first_full:
            ox = tx + math.floor(f * tw) - o.w
        elif i <= last_full:
            span = max(last_full - first_full, 1)
            a = (i - first_full) / span
            ox = int(round((1 - a) * (tx + tw - o.w) + a * tx))
        else:
            ox = tx + math.ceil((1 - f) * tw)
        out.append((int(ox), oy, o.w, o.h))
    return out


def _paste(dst, src, x, y):
    """Paste src at (x, y), clipped to dst; returns the written dst mask."""
    h, w = dst.shape[:2]
    sh, sw = src.shape[:2]
    x0, y0, x1, y1 = max(x, 0), max(y, 0), min(x + sw, w), min(y + sh, h)
    mask = np.zeros((h, w), dtype=bool)
    if x1 <= x0 or y1 <= y0:
        return mask
    dst[y0:y1, x0:x1] = src[y0 - y:y1 - y, x0 - x:x1 - x]
    mask[y0:y1, x0:x1] = True
    return mask


def render(spec: ScenarioSpec) -> tuple[list[Frame], list[MaybeBox]]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    bg = make_background(spec, rng)
    t = spec.target
    tex_a = make_texture(t.w, t.h, t.color, t.texture_seed)
    tex_b = None if t.crossfade_seed is None else make_texture(t.w, t.h, t.color, t.crossfade_seed)
    o = spec.occluder
    occ_tex = None if o is None else make_texture(o.w, o.h, o.color, o.texture_seed)
    targets = target_track(spec)
    occluders = occluder_track(spec, targets)
    frames, gt = [], []
    for i in range(spec.frames):
        rgb = bg.copy()
        depth = np.full((spec.height, spec.width), spec.background_depth_mm, dtype=np.float64)
        tx, ty, tw, th = targets[i]
        tex = tex_a
        if tex_b is not None:
            a = i / max(spec.frames - 1, 1)
            tex = (1 - a) * tex_a + a * tex_b
        if tex.shape[:2] != (th, tw):
            tex = cv2.resize(tex, (tw, th), interpolation=cv2.INTER_LINEAR)
        tmask = _paste(rgb, tex, tx, ty)
        ramp = (np.arange(tw) + 0.5) / tw - 0.5
        tdepth = spec.target_depth_at(i) + t.depth_slope_mm * np.broadcast_to(ramp, (th, tw))
        _paste(depth, tdepth, tx, ty)
        visible = tmask
        if occluders[i] is not None:
            ox, oy, ow, oh = occluders[i]
            omask = _paste(rgb, occ_tex, ox, oy)
            _paste(depth, np.full((oh, ow), o.depth_mm), ox, oy)
            visible = tmask & ~omask
        if spec.depth_noise_mm > 0:
            depth = depth + rng.normal(0, spec.depth_noise_mm, depth.shape)
        depth = np.clip(np.round(depth), 1, MAX_DEPTH_MM)
        if spec.hole_probability > 0:
            depth[rng.random(depth.shape) < spec.hole_probability] = 0
        frames.append(Frame(np.round(rgb).astype(np.uint8), depth.astype(np.uint16), i))
        if visible.any():
            rows = np.flatnonzero(visible.any(axis=1))
            cols = np.flatnonzero(visible.any(axis=0))
            gt.append(BoundingBox(float(cols[0]), float(rows[0]), float(cols[-1] - cols[0] + 1),
                                  float(rows[-1] - rows[0] + 1)))
        else:
            gt.append(None)
    return frames, gt


def generate(spec: ScenarioSpec, out_dir) -> Path:
    """Render the scenario and write it as a sequence directory (plus scenario.json)."""
    frames, gt = render(spec)
    out = Path(out_dir)
    write_sequence(out, frames, gt)
    spec.save(out / "scenario.json")
    return out


PRESETS = ("static", "fast_translation", "out_of_plane_proxy", "gradual_occlusion",
           "full_occlusion_recovery", "approach")


def preset(name: str, seed: int = 0) -> ScenarioSpec:
    """Named scenarios; ``seed`` varies background clutter, noise and textures."""
    tex = 1 + 2 * seed
    if name == "static":
        return ScenarioSpec(frames=30, seed=seed, target=TargetSpec(texture_seed=tex))
    if name == "fast_translation":
        return ScenarioSpec(frames=100, seed=seed,
                            target=TargetSpec(x=40, y=40, vx=5.0, vy=3.0, texture_seed=tex))
    if name == "out_of_plane_proxy":
        return ScenarioSpec(frames=100, seed=seed,
                            target=TargetSpec(x=60, y=80, vx=1.5, vy=0.5, texture_seed=tex,
                                              crossfade_seed=tex + 1000))
    if name == "gradual_occlusion":
        target = TargetSpec(x=120, y=90, vx=0.5, texture_seed=tex)
        occ = OccluderSpec(w=64, h=64, depth_mm=1200.0, color=target.color, texture_seed=tex + 500,
                           cover_schedule=[[0, -1.5], [20, 0.0], [50, 1.0], [60, 1.0], [80, -0.5]])
        return ScenarioSpec(frames=100, seed=seed, target=target, occluder=occ)
    if name == "full_occlusion_recovery":
        target = TargetSpec(x=130, y=90, vx=0.3, texture_seed=tex)
        occ = OccluderSpec(w=72, h=72, depth_mm=1200.0, texture_seed=tex + 500,
                           cover_schedule=[[0, -3.0], [30, 0.0], [40, 1.0], [50, 1.0], [55, 0.0], [70, -2.0]])
        return ScenarioSpec(frames=100, seed=seed, target=target, occluder=occ)
    if name == "approach":
        return ScenarioSpec(frames=51, seed=seed, background_depth_mm=9500.0,
                            target=TargetSpec(x=144, y=104, w=32, h=32, depth_mm=7000.0,
                                              depth_velocity_mm=-100.0, perspective=True, texture_seed=tex))
    raise ValueError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
