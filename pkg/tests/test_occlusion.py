import numpy as np
import pytest

from conftest import textured
from rgbdtrack.core import BoundingBox, Frame
from rgbdtrack.depth_model import DepthGaussian
from rgbdtrack.detector import Detection
from rgbdtrack.occlusion import (CandidateRegion, OccluderModel, color_histogram, init_occluder, local_search,
                                 segment_depth, segment_joint, segment_rgb, track_occluder, try_recover)

TARGET = DepthGaussian(3000, 100)


def plate_scene(plate_x=40, plate_w=24, w=160, h=120, seed=0):
    """Target (3000 mm) at (40, 30, 48, 48); plate (1000 mm) covering columns [plate_x, plate_x + plate_w)."""
    rgb = textured(h, w, 50 + seed, base=100, spread=20)
    depth = np.full((h, w), 6000, np.uint16)
    rgb[30:78, 40:88] = textured(48, 48, seed)
    depth[30:78, 40:88] = 3000
    rgb[20:90, plate_x:plate_x + plate_w] = textured(70, plate_w, 99, base=200, spread=40)
    depth[20:90, plate_x:plate_x + plate_w] = 1000
    return Frame(rgb, depth, 0)


def occluder(box, area=48 * 48):
    return OccluderModel(DepthGaussian(1000, 30), np.zeros((16, 16, 16)), box, area)


def test_init_occluder_plate():
    f = plate_scene()
    tb = BoundingBox(40, 30, 48, 48)
    occ = init_occluder(f, tb, TARGET)
    assert abs(occ.depth.mu - 1000) <= 60
    assert occ.box == BoundingBox(40, 30, 24, 48)  # left half of the target box
    assert occ.target_area_pre == tb.area
    assert occ.color_hist.sum() == pytest.approx(1.0)


def test_init_occluder_no_near_pixels():
    f = plate_scene(plate_x=120, plate_w=10)
    with pytest.raises(ValueError):
        init_occluder(f, BoundingBox(40, 30, 48, 48), TARGET)


def test_single_color_histogram_is_delta():
    px = np.tile([[200, 30, 90]], (50, 1))
    h = color_histogram(px)
    assert h.max() == 1.0 and h.sum() == 1.0
    assert h[200 * 16 // 256, 30 * 16 // 256, 90 * 16 // 256] == 1.0


def test_track_occluder_static():
    f = plate_scene()
    occ = occluder(BoundingBox(40, 20, 24, 70))
    out = track_occluder(f, f, occ)
    assert all(abs(a - b) <= 1 for a, b in zip(out.box.as_tuple(), occ.box.as_tuple()))
    assert abs(out.depth.mu - 1000) <= 60


def test_track_occluder_follows_translation():
    box = BoundingBox(30, 20, 24, 70)
    occ = occluder(box)
    prev = plate_scene(plate_x=30)
    for k in range(1, 5):
        cur = plate_scene(plate_x=30 + 5 * k)
        occ = track_occluder(prev, cur, occ)
        assert abs(occ.box.x - (30 + 5 * k)) <= k and abs(occ.box.y - 20) <= k
        prev = cur


def test_track_occluder_holds_on_flow_failure():
    rng = np.random.default_rng(1)
    a = Frame(rng.integers(0, 256, (120, 160, 3), dtype=np.uint8), np.full((120, 160), 1000, np.uint16), 0)
    b = Frame(rng.integers(0, 256, (120, 160, 3), dtype=np.uint8), np.full((120, 160), 1000, np.uint16), 1)
    occ = occluder(BoundingBox(40, 30, 30, 30))
    assert track_occluder(a, b, occ).box == occ.box


def frame_from(rgb, depth):
    return Frame(np.asarray(rgb, np.uint8), np.asarray(depth, np.uint16), 0)


ROI = BoundingBox(0, 0, 40, 30)


def test_segment_depth_two_planes():
    d = np.full((30, 40), 2000)
    d[:, 20:] = 4000
    assert len(segment_depth(frame_from(np.zeros((30, 40, 3)), d), ROI)) == 2


def test_segment_depth_all_invalid():
    assert segment_depth(frame_from(np.zeros((30, 40, 3)), np.zeros((30, 40))), ROI) == []


def test_segment_depth_staircase_inclusive():
    d = 1000 + 100 * (np.arange(40) // 4)[None, :].repeat(30, 0)
    regions = segment_depth(frame_from(np.zeros((30, 40, 3)), d), ROI)
    assert len(regions) == 1 and regions[0].area == 1200
    d2 = 1000 + 101 * (np.arange(40) // 4)[None, :].repeat(30, 0)
    assert len(segment_depth(frame_from(np.zeros((30, 40, 3)), d2), ROI)) == 10


def test_segment_rgb_examples():
    rgb = np.zeros((30, 40, 3))
    rgb[:, 20:] = (200, 10, 10)
    assert len(segment_rgb(frame_from(rgb, np.ones((30, 40))), ROI)) == 2
    uni = segment_rgb(frame_from(np.full((30, 40, 3), 77), np.ones((30, 40))), ROI)
    assert len(uni) == 1 and uni[0].box == ROI
    # with 8-connectivity a two-color board joins along diagonals, so use four
    # colors per 2x2 tile: every neighbor, diagonal included, differs by > 30
    palette = np.array([[0, 0, 0], [200, 0, 0], [0, 200, 0], [0, 0, 200]])
    i, j = np.indices((30, 40))
    checker = palette[(i % 2) * 2 + j % 2]
    assert segment_rgb(frame_from(checker, np.ones((30, 40))), ROI, min_area=5) == []
    two = (np.indices((30, 40)).sum(0) % 2)[..., None] * np.array([0, 0, 200])
    assert len(segment_rgb(frame_from(two, np.ones((30, 40))), ROI, min_area=5)) == 2


def test_segment_rgb_uses_diagonal_neighbors():
    rgb = np.zeros((30, 40, 3))
    rgb[np.arange(30), np.arange(30)] = 250  # a diagonal line joins only through 8-neighbors
    regions = segment_rgb(frame_from(rgb, np.ones((30, 40))), ROI)
    assert sorted(r.area for r in regions)[0] == 30


def test_joint_segments_partition_valid_pixels():
    rng = np.random.default_rng(2)
    d = rng.choice([0, 2000, 2050, 4000], (30, 40))
    rgb = rng.choice([0, 100, 200], (30, 40, 3))
    regions = segment_joint(frame_from(rgb, d), ROI)
    cover = np.zeros((30, 40), int)
    for r in regions:
        cover += r.mask
    assert (cover == (d > 0)).all()


def emergence_scene():
    """Occluder plate over columns [40, 64); target visible to its right, columns [64, 88)."""
    return plate_scene(plate_x=40, plate_w=24)


def test_local_search_occluder_only():
    rgb = np.full((120, 160, 3), 200, np.uint8)
    depth = np.full((120, 160), 1000, np.uint16)
    f = Frame(rgb, depth, 0)
    occ = occluder(BoundingBox(60, 40, 30, 30))
    dets = [Detection(BoundingBox(70, 50, 20, 20), 0.4)]
    out = local_search(f, occ, TARGET, lambda b: 9.0, dets)
    assert [c.box for c in out] == [dets[0].box]
    assert local_search(f, occ, TARGET, lambda b: 9.0) == []


def test_local_search_finds_emerging_target():
    f = emergence_scene()
    occ = occluder(BoundingBox(40, 20, 24, 70))
    visible = BoundingBox(64, 30, 24, 48)
    out = local_search(f, occ, TARGET, lambda b: 0.0)
    assert any(c.box.area > 0 and _overlap(c.box, visible) >= 0.5 for c in out)
    for c in out:
        assert c.area == c.box.area and 0 <= c.overlap_with_occluder <= 1


def _overlap(a, b):
    from rgbdtrack.core import iou
    return iou(a, b)


def test_local_search_deduplicates():
    f = emergence_scene()
    occ = occluder(BoundingBox(40, 20, 24, 70))
    base = local_search(f, occ, TARGET, lambda b: 0.0)
    dup = [Detection(c.box, 5.0) for c in base]
    merged = local_search(f, occ, TARGET, lambda b: 0.0, dup)
    assert len(merged) == len(base)
    assert all(c.svm_score == 5.0 for c in merged)


def cand(box, score, area=None, overlap=0.1):
    return CandidateRegion(box, box.area if area is None else area, score, overlap)


def test_try_recover_examples():
    occ = occluder(BoundingBox(0, 0, 10, 10), area=100)
    assert try_recover([], occ) is None
    b = BoundingBox(50, 50, 9, 10)
    assert try_recover([cand(b, 1.0, 90, 0.1)], occ, tau_detect=0.0) == b
    b2 = BoundingBox(70, 50, 9, 10)
    assert try_recover([cand(b2, 0.8, 90), cand(b, 1.2, 90)], occ) == b


@pytest.mark.parametrize("area,overlap,score", [(40, 0.1, 1.0), (90, 0.5, 1.0), (90, 0.1, -0.2)])
def test_try_recover_each_condition_required(area, overlap, score):
    occ = occluder(BoundingBox(0, 0, 10, 10), area=100)
    assert try_recover([cand(BoundingBox(50, 50, 9, 10), score, area, overlap)], occ) is None
