"""Slow, obvious reference implementations used as test oracles.

Nothing here imports the package's numerical code; each function is written
from the definitions with plain loops.
"""
import math

import numpy as np


def naive_cell_histograms(img, cell_size=8, bins=9, valid=None):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w, nch = img.shape
    cy, cx = h // cell_size, w // cell_size
    out = np.zeros((cy, cx, bins))
    step = math.pi / bins

    def px(y, x, c):
        return img[min(max(y, 0), h - 1), min(max(x, 0), w - 1), c]

    def ok(y, x):
        return valid is None or bool(valid[min(max(y, 0), h - 1), min(max(x, 0), w - 1)])

    for y in range(cy * cell_size):
        for x in range(cx * cell_size):
            if not (ok(y, x) and ok(y, x - 1) and ok(y, x + 1) and ok(y - 1, x) and ok(y + 1, x)):
                continue
            best = None
            for c in range(nch):
                gx = px(y, x + 1, c) - px(y, x - 1, c)
                gy = px(y + 1, x, c) - px(y - 1, x, c)
                m2 = gx * gx + gy * gy
                if best is None or m2 > best[0]:
                    best = (m2, gx, gy)
            m2, gx, gy = best
            if m2 == 0:
                continue
            theta = math.atan2(gy, gx)
            if theta < 0:
                theta += math.pi
            if theta >= math.pi:
                theta -= math.pi
            b = theta / step
            lo = math.floor(b)
            frac = b - lo
            out[y // cell_size, x // cell_size, lo % bins] += (1 - frac) * math.sqrt(m2)
            out[y // cell_size, x // cell_size, (lo + 1) % bins] += frac * math.sqrt(m2)
    return out


def naive_block_normalize(hist, clip=0.2, eps=1e-6):
    cy, cx, bins = hist.shape
    acc = np.zeros_like(hist)
    cnt = np.zeros((cy, cx))
    for by in range(cy - 1):
        for bx in range(cx - 1):
            cells = [(by, bx), (by, bx + 1), (by + 1, bx), (by + 1, bx + 1)]
            v = [hist[c][k] for c in cells for k in range(bins)]
            n = math.sqrt(sum(t * t for t in v) + eps * eps)
            v = [min(t / n, clip) for t in v]
            n = math.sqrt(sum(t * t for t in v) + eps * eps)
            v = [t / n for t in v]
            for i, c in enumerate(cells):
                for k in range(bins):
                    acc[c][k] += v[i * bins + k]
                cnt[c] += 1
    return acc / cnt[..., None]


def naive_hog(img, cell_size=8, bins=9, valid=None):
    return naive_block_normalize(naive_cell_histograms(img, cell_size, bins, valid))


def box_mask(box, size):
    """Pixel set of an integer-aligned box (x, y, w, h) on a size x size grid."""
    x, y, w, h = (int(v) for v in box)
    m = np.zeros((size, size), dtype=bool)
    m[y:y + h, x:x + w] = True
    return m


def pixel_jaccard(a, b, size):
    ma, mb = box_mask(a, size), box_mask(b, size)
    return (ma & mb).sum() / (ma | mb).sum()


def brute_overlap(t, g, size):
    if t is None and g is None:
        return 1.0
    if t is None or g is None:
        return -1.0
    return pixel_jaccard(t, g, size)


def brute_metrics(ts, gs, r_t, size):
    rs, kinds = [], []
    for t, g in zip(ts, gs):
        r = brute_overlap(t, g, size)
        rs.append(r)
        if t is None and g is None:
            kinds.append("ok")
        elif g is None:
            kinds.append("II")
        elif t is None:
            kinds.append("III")
        elif r > r_t:
            kinds.append("ok")
        else:
            kinds.append("I")
    n = len(rs)
    success = sum(1 for r in rs if r > r_t) / n
    rates = {k: kinds.count(k) / n for k in ("I", "II", "III")}
    return rs, success, rates


def brute_speed(gs, size):
    best = None
    for a, b in zip(gs[:-1], gs[1:]):
        if a is None or b is None:
            continue
        v = 1 - pixel_jaccard(a, b, size)
        best = v if best is None else max(best, v)
    return best


def svm_objective(w, b, X, y, C=1.0):
    pos, neg = y > 0, y < 0
    m = y * (X @ w + b)
    hinge = np.maximum(0, 1 - m)
    return 0.5 * (w @ w + b * b) + C * (hinge[pos].mean() + hinge[neg].mean()) / 2


def subgradient_svm(X, y, C=1.0, iters=200000):
    """Full-batch subgradient descent with 1/t steps (the objective is
    1-strongly convex) and suffix averaging; returns the best iterate seen."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pos, neg = y > 0, y < 0
    cw = np.where(pos, C / (2 * pos.sum()), C / (2 * neg.sum()))
    w = np.zeros(X.shape[1])
    b = 0.0
    best = (svm_objective(w, b, X, y, C), w.copy(), b)
    avg_w, avg_b, n_avg = np.zeros_like(w), 0.0, 0
    for t in range(1, iters + 1):
        active = y * (X @ w + b) < 1
        gw = w - (cw * y * active) @ X
        gb = b - float((cw * y * active).sum())
        w = w - gw / t
        b = b - gb / t
        if t > iters // 2:
            avg_w += w
            avg_b += b
            n_avg += 1
        if t % 1000 == 0:
            f = svm_objective(w, b, X, y, C)
            if f < best[0]:
                best = (f, w.copy(), b)
    aw, ab = avg_w / n_avg, avg_b / n_avg
    f = svm_objective(aw, ab, X, y, C)
    if f < best[0]:
        best = (f, aw, ab)
    return best
