import numpy as np
import pytest

from rgbdtrack.core import BoundingBox, Frame


def textured(h, w, seed, base=128.0, spread=60.0):
    """Smooth-ish random RGB texture with strong local gradients."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(base - spread, base + spread, (h // 4 + 2, w // 4 + 2, 3))
    img = np.kron(coarse, np.ones((4, 4, 1)))[:h, :w]
    return np.clip(img + rng.normal(0, 4, img.shape), 0, 255).astype(np.uint8)


def scene(w=160, h=120, box=(60, 40, 32, 32), target_depth=3000, bg_depth=6000, seed=0, bg_seed=None):
    """Textured target square on a flatter background, with a matching depth map."""
    rng = np.random.default_rng(100 + seed if bg_seed is None else bg_seed)
    rgb = np.clip(rng.normal(110, 8, (h, w, 3)), 0, 255).astype(np.uint8)
    depth = np.full((h, w), bg_depth, dtype=np.uint16)
    x, y, bw, bh = box
    rgb[y:y + bh, x:x + bw] = textured(bh, bw, seed)
    depth[y:y + bh, x:x + bw] = target_depth
    return rgb, depth


def scene_frame(index=0, **kw):
    rgb, depth = scene(**kw)
    return Frame(rgb, depth, index)


@pytest.fixture
def frame():
    return scene_frame()


@pytest.fixture
def target_box():
    return BoundingBox(60, 40, 32, 32)
