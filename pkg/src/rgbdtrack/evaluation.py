"""Benchmark metrics: overlap ratio, center error, success rate, failure types, target speed."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MaybeBox, iou


class ErrorType(enum.Enum):
    NONE = "none"
    I = "I"  # both boxes present, overlap not above threshold
    II = "II"  # output while the target is invisible
    III = "III"  # no output while the target is visible


def overlap(t: MaybeBox, g: MaybeBox) -> float:
    """IoU when both boxes exist, 1 when both are absent, -1 otherwise."""
    if t is None and g is None:
        return 1.0
    if t is None or g is None:
        return -1.0
    return iou(t, g)


def cpe(t: MaybeBox, g: MaybeBox) -> float | None:
    """Distance between box centers; None when either box is absent."""
    if t is None or g is None:
        return None
    (tx, ty), (gx, gy) = t.center, g.center
    return math.hypot(tx - gx, ty - gy)


def success_rate(rs: Sequence[float], r_t: float) -> float:
    rs = np.asarray(rs, dtype=np.float64)
    if rs.size == 0:
        raise ValueError("success rate of an empty stream")
    return float(np.mean(rs > r_t))


def classify(t: MaybeBox, g: MaybeBox, r_t: float) -> ErrorType:
    if t is not None and g is None:
        return ErrorType.II
    if t is None and g is not None:
        return ErrorType.III
    if t is not None and overlap(t, g) <= r_t:
        return ErrorType.I
    return ErrorType.NONE


@dataclass
class FrameScore:
    r: float
    cpe: float | None
    error_type: ErrorType


def score_frames(t_stream: Sequence[MaybeBox], g_stream: Sequence[MaybeBox], r_t=0.5) -> list[FrameScore]:
    if len(t_stream) != len(g_stream):
        raise ValueError(f"result stream has {len(t_stream)} frames, ground truth has {len(g_stream)}")
    return [FrameScore(overlap(t, g), cpe(t, g), classify(t, g, r_t)) for t, g in zip(t_stream, g_stream)]


def classify_errors(t_stream, g_stream, r_t=0.5) -> tuple[list[ErrorType], dict[ErrorType, float]]:
    """Per-frame failure type and the fraction of frames of each type."""
    types = [s.error_type for s in score_frames(t_stream, g_stream, r_t)]
    n = max(len(types), 1)
    rates = {e: sum(1 for x in types if x is e) / n for e in (ErrorType.I, ErrorType.II, ErrorType.III)}
    return types, rates


def speed_stats(g_stream: Sequence[MaybeBox]) -> tuple[float, float]:
    """(max, mean) of 1 - overlap over consecutive ground-truth pairs where both boxes exist."""
    if len(g_stream) < 2:
        raise ValueError("target speed needs at least two frames")
    values = [1.0 - overlap(a, b) for a, b in zip(g_stream[:-1], g_stream[1:])
              if a is not None and b is not None]
    if not values:
        raise ValueError("no consecutive pair of frames with the target visible")
    return max(values), float(np.mean(values))


def speed_stat(g_stream: Sequence[MaybeBox]) -> float:
    return speed_stats(g_stream)[0]


def success_curve(rs: Sequence[float], samples=20) -> list[tuple[float, float]]:
    if samples < 2:
        raise ValueError("need at least 2 samples")
    return [(k / samples, success_rate(rs, k / samples)) for k in range(1, samples)]


@dataclass
class SequenceMetrics:
    r_t: float
    success_rate: float
    error_rates: dict
    curve: list
    speed: float
    speed_mean: float
    frames: list

    @property
    def type_i(self) -> float:
        return self.error_rates[ErrorType.I]

    @property
    def type_ii(self) -> float:
        return self.error_rates[ErrorType.II]

    @property
    def type_iii(self) -> float:
        return self.error_rates[ErrorType.III]


def evaluate(t_stream, g_stream, r_t=0.5, samples=20) -> SequenceMetrics:
    frames = score_frames(t_stream, g_stream, r_t)
    rs = [f.r for f in frames]
    _, rates = classify_errors(t_stream, g_stream, r_t)
    try:
        speed, speed_mean = speed_stats(g_stream)
    except ValueError:
        speed = speed_mean = float("nan")
    return SequenceMetrics(r_t, success_rate(rs, r_t), rates, success_curve(rs, samples), speed, speed_mean, frames)
