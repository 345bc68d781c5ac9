import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import box_mask
from rgbdtrack.core import BoundingBox, Frame, TrackMode, intersect_area, iou, union_area


def B(*v):
    return BoundingBox(*v)


@pytest.mark.parametrize("a,b,inter,union", [
    ((0, 0, 10, 10), (0, 0, 10, 10), 100, 100),
    ((0, 0, 10, 10), (20, 20, 5, 5), 0, 125),
    ((0, 0, 10, 10), (5, 0, 10, 10), 50, 150),
    ((0, 0, 2, 2), (10, 10, 3, 3), 0, 13),
])
def test_area_examples(a, b, inter, union):
    assert intersect_area(B(*a), B(*b)) == inter
    assert union_area(B(*a), B(*b)) == union


@pytest.mark.parametrize("bad", [(0, 0, 0, 5), (0, 0, 5, -1), (float("nan"), 0, 1, 1), (0, float("inf"), 1, 1)])
def test_box_rejects_degenerate(bad):
    with pytest.raises(ValueError):
        BoundingBox(*bad)


int_box = st.tuples(st.integers(0, 63), st.integers(0, 63), st.integers(1, 64), st.integers(1, 64)).filter(
    lambda b: b[0] + b[2] <= 64 and b[1] + b[3] <= 64)


@settings(max_examples=300, deadline=None)
@given(int_box, int_box)
def test_intersection_matches_pixel_count(a, b):
    ma, mb = box_mask(a, 64), box_mask(b, 64)
    assert intersect_area(B(*a), B(*b)) == (ma & mb).sum()
    assert union_area(B(*a), B(*b)) == (ma | mb).sum()


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-50, 50)] * 2, *[st.floats(0.5, 40)] * 2),
       st.tuples(*[st.floats(-50, 50)] * 2, *[st.floats(0.5, 40)] * 2))
def test_area_bounds_and_symmetry(a, b):
    a, b = B(*a), B(*b)
    i = intersect_area(a, b)
    assert 0 <= i <= min(a.area, b.area) + 1e-9
    assert i == intersect_area(b, a)
    assert union_area(a, b) == pytest.approx(union_area(b, a))
    assert iou(a, a) == pytest.approx(1.0)


def test_clip_and_shift():
    b = B(-5, -5, 20, 10)
    assert b.clip(100, 100) == B(0, 0, 15, 5)
    assert B(200, 0, 5, 5).clip(100, 100) is None
    assert b.shift_inside(100, 100) == B(0, 0, 20, 10)
    assert B(95, 95, 10, 10).shift_inside(100, 100) == B(90, 90, 10, 10)


def test_pixel_slices_follow_half_open_centers():
    ys, xs = B(2, 3, 4, 5).pixel_slices(20, 20)
    assert (xs.start, xs.stop, ys.start, ys.stop) == (2, 6, 3, 8)
    ys, xs = B(2.6, 0, 1, 1).pixel_slices(20, 20)
    assert (xs.start, xs.stop) == (3, 4)  # only pixel 3's center (3.5) is inside [2.6, 3.6)


def test_frame_validation_and_clamping():
    rgb = np.zeros((4, 5, 3), dtype=np.uint8)
    f = Frame(rgb, np.array([[12000] * 5] * 4), 0)
    assert f.depth.dtype == np.uint16 and f.depth.max() == 10000
    assert f.shape == (4, 5)
    with pytest.raises(ValueError):
        Frame(rgb, np.zeros((4, 4)), 0)
    with pytest.raises(ValueError):
        Frame(rgb, np.zeros((4, 5)), -1)
    with pytest.raises(ValueError):
        f.rgb[0, 0, 0] = 1


def test_mode_flags():
    assert TrackMode.parse("RGBDOcc") is TrackMode.RGBDOCC
    assert not TrackMode.RGB.uses_depth_features and not TrackMode.RGB.handles_occlusion
    assert TrackMode.RGBD.uses_depth_features and not TrackMode.RGBD.handles_occlusion
    assert not TrackMode.RGBOCC.uses_depth_features and TrackMode.RGBOCC.handles_occlusion
    with pytest.raises(ValueError):
        TrackMode.parse("depth")
