"""Pure numpy/scipy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
"""
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


def cell_histograms(img, valid, cell_size, bins):
    """Unnormalized orientation histograms per cell.

    img is float64 HxWxC; the gradient of the channel with the largest
    magnitude is used at each pixel.  valid (HxW bool or None) zeroes the
    gradient of every pixel whose central difference touches an invalid one.
    Votes are split linearly between the two nearest orientation bins, whose
    centers sit at k*pi/bins.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w, nch = img.shape
    cy, cx = h // cell_size, w // cell_size
    p = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    mag2 = gx * gx + gy * gy
    if nch > 1:
        best = np.argmax(mag2, axis=2)[..., None]
        gx = np.take_along_axis(gx, best, axis=2)
        gy = np.take_along_axis(gy, best, axis=2)
        mag2 = np.take_along_axis(mag2, best, axis=2)
    gx, gy, mag = gx[..., 0], gy[..., 0], np.sqrt(mag2[..., 0])
    if valid is not None:
        v = np.pad(np.asarray(valid, dtype=bool), 1, mode="edge")
        ok = (v[1:-1, 1:-1] & v[1:-1, 2:] & v[1:-1, :-2] & v[2:, 1:-1] & v[:-2, 1:-1])
        mag = np.where(ok, mag, 0.0)

    hh, ww = cy * cell_size, cx * cell_size
    gx, gy, mag = gx[:hh, :ww], gy[:hh, :ww], mag[:hh, :ww]
    theta = np.arctan2(gy, gx)
    theta = np.where(theta < 0, theta + np.pi, theta)
    theta = np.where(theta >= np.pi, theta - np.pi, theta)
    b = theta / (np.pi / bins)
    fl = np.floor(b)
    frac = b - fl
    b0 = fl.astype(np.int64) % bins
    b1 = (b0 + 1) % bins

    rows = np.arange(hh) // cell_size
    cols = np.arange(ww) // cell_size
    cell = (rows[:, None] * cx + cols[None, :]) * bins
    n = cy * cx * bins
    out = np.bincount((cell + b0).ravel(), weights=((1.0 - frac) * mag).ravel(), minlength=n)
    out += np.bincount((cell + b1).ravel(), weights=(frac * mag).ravel(), minlength=n)
    return out.reshape(cy, cx, bins)


def score_map(grid, weights):
    """Dense correlation of a (cy, cx, D) grid with a (ty, tx, D) template."""
    grid = np.asarray(grid, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    cy, cx, _ = grid.shape
    ty, tx, _ = weights.shape
    ny, nx = cy - ty + 1, cx - tx + 1
    if ny <= 0 or nx <= 0:
        return np.zeros((max(ny, 0), max(nx, 0)))
    out = np.zeros((ny, nx))
    for dy in range(ty):
        for dx in range(tx):
            out += grid[dy:dy + ny, dx:dx + nx] @ weights[dy, dx]
    return out


def label_components(values, valid, tol, connectivity):
    """Connected components of the "neighbors differ by <= tol" graph.

    values is float64 HxWxC (difference = max over channels), valid HxW bool.
    Returns int32 labels, -1 on invalid pixels, components numbered in raster
    order of their first pixel.
    """
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape[:2]
    valid = np.asarray(valid, dtype=bool)
    idx = np.arange(h * w).reshape(h, w)
    offsets = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    src, dst = [], []
    for dy, dx in offsets:
        x0, x1 = max(0, -dx), w - max(0, dx)
        ys, yd = slice(0, h - dy), slice(dy, h)
        xs, xd = slice(x0, x1), slice(x0 + dx, x1 + dx)
        a, b = values[ys, xs], values[yd, xd]
        ok = valid[ys, xs] & valid[yd, xd] & (np.abs(a - b).max(axis=2) <= tol)
        src.append(idx[ys, xs][ok])
        dst.append(idx[yd, xd][ok])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    n = h * w
    graph = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(n, n))
    _, lab = connected_components(graph, directed=False)
    lab = lab.reshape(h, w)
    flat = lab[valid]
    out = np.full((h, w), -1, dtype=np.int32)
    if flat.size:
        uniq, first = np.unique(flat, return_index=True)
        rank = np.empty(uniq.size, dtype=np.int32)
        rank[np.argsort(first)] = np.arange(uniq.size, dtype=np.int32)
        out[valid] = rank[np.searchsorted(uniq, flat)]
    return out


def svm_dual_cd(X, y, upper, orders, tol):
    """Dual coordinate descent for the L1-loss linear SVM.

    Solves min 0.5*|w|^2 + sum_i upper_i * hinge(y_i w.x_i); each row of
    ``orders`` is the visiting order for one pass.  Returns (w, passes).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    n = X.shape[0]
    K = X @ X.T
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    margin = np.zeros(n)  # w.x_i
    passes = 0
    for order in orders:
        passes += 1
        pg_max, pg_min = -np.inf, np.inf
        for i in order:
            if diag[i] <= 0.0:
                continue
            g = y[i] * margin[i] - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                new = min(max(a - g / diag[i], 0.0), upper[i])
                if new != a:
                    margin += ((new - a) * y[i]) * K[:, i]
                    alpha[i] = new
        if pg_max - pg_min <= tol:
            break
    return X.T @ (alpha * y), passes


def bilinear(img, xs, ys):
    """Sample HxWxC ``img`` at the grid ys x xs (source coordinates, already clamped)."""
    h, w = img.shape[:2]
    xl = np.minimum(np.floor(xs).astype(np.intp), w - 1)
    yl = np.minimum(np.floor(ys).astype(np.intp), h - 1)
    xh = np.minimum(xl + 1, w - 1)
    yh = np.minimum(yl + 1, h - 1)
    fx = (xs - xl)[None, :, None]
    fy = (ys - yl)[:, None, None]
    rows = img[yl] * (1 - fy) + img[yh] * fy
    return rows[:, xl] * (1 - fx) + rows[:, xh] * fx
