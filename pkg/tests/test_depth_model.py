import numpy as np
import pytest

from rgbdtrack.core import BoundingBox
from rgbdtrack.detector import Detection
from rgbdtrack.depth_model import (DepthGaussian, DepthHistogram, fit_gaussian, gate, histogram, histogram_of,
                                   observe, occlusion_likelihood, recenter, update_gaussian)

BOX = BoundingBox(0, 0, 20, 10)


def test_histogram_examples():
    assert histogram(np.zeros((10, 20)), BOX).total == 0
    h = histogram(np.full((10, 20), 3000), BOX)
    assert h.total == 200 and np.flatnonzero(h.counts).tolist() == [60]
    d = np.full((10, 20), 2000)
    d[:, 10:] = 4000
    h = histogram(d, BOX)
    assert h.counts[40] == h.counts[80] == 100 and h.total == 200


def test_invalid_pixels_excluded():
    d = np.full((10, 20), 3000)
    d[:3] = 0
    assert histogram(d, BOX).total == 140


def test_fit_examples():
    g = fit_gaussian(histogram_of(np.full(50, 3000)))
    assert (g.mu, g.sigma) == (3025, 30)
    g = fit_gaussian(histogram_of(np.r_[np.full(10, 2000), np.full(10, 4000)]))
    assert g.mu == pytest.approx(3025) and g.sigma == pytest.approx(1000)
    with pytest.raises(ValueError):
        fit_gaussian(histogram_of([0, 0]))


def test_fit_monte_carlo():
    v = np.random.default_rng(42).normal(2500, 200, 200000)
    g = fit_gaussian(histogram_of(v))
    assert abs(g.mu - 2500) <= 20 and abs(g.sigma - 200) <= 20


def test_gaussian_validation():
    with pytest.raises(ValueError):
        DepthGaussian(0, 10)
    with pytest.raises(ValueError):
        DepthGaussian(100, 0)


def test_likelihood_examples():
    g = DepthGaussian(3000, 100)
    assert occlusion_likelihood(histogram_of(np.full(100, 3000)), g) == 0
    v = np.r_[np.full(30, 2500), np.full(70, 3000)]
    assert occlusion_likelihood(histogram_of(v), g) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        occlusion_likelihood(DepthHistogram(50.0, np.zeros(10, np.int64)), g)


def test_likelihood_plate_pixel_count():
    # 40 of 100 box columns covered by a front plate, with sensor noise and holes
    rng = np.random.default_rng(3)
    d = rng.normal(3000, 10, (100, 100))
    d[:, :40] = rng.normal(1000, 10, (100, 40))
    d[rng.random(d.shape) < 0.02] = 0
    d = d.astype(np.uint16)
    box = BoundingBox(0, 0, 100, 100)
    oracle = ((d > 0) & (d < 2900)).sum() / (d > 0).sum()
    o = occlusion_likelihood(histogram(d, box), DepthGaussian(3000, 100))
    assert abs(o - 0.40) <= 0.02 and o == pytest.approx(oracle, abs=0.01)


def test_likelihood_in_unit_interval():
    rng = np.random.default_rng(5)
    for _ in range(50):
        h = histogram_of(rng.integers(1, 10000, 300))
        o = occlusion_likelihood(h, DepthGaussian(float(rng.uniform(100, 9000)), float(rng.uniform(30, 800))))
        assert 0 <= o <= 1


def test_gate_examples():
    d = np.full((50, 100), 3000, np.uint16)
    d[:, 50:] = 4000
    g = DepthGaussian(3000, 100)
    near = Detection(BoundingBox(0, 0, 20, 20), 1.0)
    far = Detection(BoundingBox(60, 0, 20, 20), 1.0)  # offset 1000 > 3 * 100 + 200
    assert gate([near, far], d, g) == [near]
    assert gate([near, far], d, None) == [near, far]
    hole = Detection(BoundingBox(0, 0, 20, 20), 0.5)
    assert gate([hole], np.zeros_like(d), g) == [hole]


def test_observe_ignores_out_of_gate_pixels():
    d = np.full((20, 20), 3000, np.uint16)
    d[:, :8] = 1000
    o = observe(d, BoundingBox(0, 0, 20, 20), DepthGaussian(3000, 100))
    assert o.mu == 3025
    assert observe(np.full((20, 20), 1000), BoundingBox(0, 0, 20, 20), DepthGaussian(3000, 100)) is None


def target_map(cx, cy, size=20, w=100, h=80):
    d = np.full((h, w), 6000, np.uint16)
    d[cy - size // 2:cy + size // 2, cx - size // 2:cx + size // 2] = 3000
    return d


def test_recenter_fixed_point():
    d = target_map(50, 40)
    box = BoundingBox(40, 30, 20, 20)
    assert recenter(box, d, DepthGaussian(3000, 100)) == box


def test_recenter_pulls_to_target():
    d = target_map(44, 40)  # target 6 px left of the box center
    out = recenter(BoundingBox(40, 30, 20, 20), d, DepthGaussian(3000, 100))
    cx, cy = out.center
    assert abs(cx - 44) <= 2 and abs(cy - 40) <= 2
    assert (out.w, out.h) == (20, 20)


def test_recenter_empty_mask():
    box = BoundingBox(40, 30, 20, 20)
    assert recenter(box, np.zeros((80, 100), np.uint16), DepthGaussian(3000, 100)) == box


def test_update_examples():
    g, o = DepthGaussian(3000, 100), DepthGaussian(2000, 100)
    assert update_gaussian(g, o, 1.0) == o
    assert update_gaussian(g, g, 0.3) == g
    assert update_gaussian(g, o, 0.2).mu == pytest.approx(2800)
    assert update_gaussian(DepthGaussian(3000, 30), DepthGaussian(3000, 30), 0.5).sigma == 30
    with pytest.raises(ValueError):
        update_gaussian(g, o, 0)
