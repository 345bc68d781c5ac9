# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``; same signatures, same results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sqrt, floor, fabs, M_PI

cnp.import_array()


def cell_histograms(img, valid, int cell_size, int bins):
    cdef double[:, :, ::1] im = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], nch = im.shape[2]
    cdef Py_ssize_t cy = h // cell_size, cx = w // cell_size
    out_arr = np.zeros((cy, cx, bins), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.uint8_t[:, ::1] vm
    cdef bint has_valid = valid is not None
    if has_valid:
        vm = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef Py_ssize_t y, x, c, xl, xr, yu, yd, b0, b1
    cdef double gx, gy, m2, bgx, bgy, bm2, mag, theta, b, fl, frac
    cdef double step = M_PI / bins
    for y in range(cy * cell_size):
        yu = y - 1 if y > 0 else 0
        yd = y + 1 if y < h - 1 else h - 1
        for x in range(cx * cell_size):
            xl = x - 1 if x > 0 else 0
            xr = x + 1 if x < w - 1 else w - 1
            if has_valid:
                if not (vm[y, x] and vm[y, xl] and vm[y, xr] and vm[yu, x] and vm[yd, x]):
                    continue
            bm2 = -1.0
            bgx = 0.0
            bgy = 0.0
            for c in range(nch):
                gx = im[y, xr, c] - im[y, xl, c]
                gy = im[yd, x, c] - im[yu, x, c]
                m2 = gx * gx + gy * gy
                if m2 > bm2:
                    bm2 = m2
                    bgx = gx
                    bgy = gy
            if bm2 <= 0.0:
                continue
            mag = sqrt(bm2)
            theta = atan2(bgy, bgx)
            if theta < 0:
                theta = theta + M_PI
            if theta >= M_PI:
                theta = theta - M_PI
            b = theta / step
            fl = floor(b)
            frac = b - fl
            b0 = (<Py_ssize_t>fl) % bins
            b1 = (b0 + 1) % bins
            out[y // cell_size, x // cell_size, b0] += (1.0 - frac) * mag
            out[y // cell_size, x // cell_size, b1] += frac * mag
    return out_arr


def score_map(grid, weights):
    cdef double[:, :, ::1] g = np.ascontiguousarray(grid, dtype=np.float64)
    cdef double[:, :, ::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t cy = g.shape[0], cx = g.shape[1], d = g.shape[2]
    cdef Py_ssize_t ty = wt.shape[0], tx = wt.shape[1]
    cdef Py_ssize_t ny = cy - ty + 1, nx = cx - tx + 1
    if ny <= 0 or nx <= 0:
        return np.zeros((max(ny, 0), max(nx, 0)))
    out_arr = np.zeros((ny, nx), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, dy, dx, k
    cdef double acc
    for i in range(ny):
        for j in range(nx):
            acc = 0.0
            for dy in range(ty):
                for dx in range(tx):
                    for k in range(d):
                        acc += g[i + dy, j + dx, k] * wt[dy, dx, k]
            out[i, j] = acc
    return out_arr


cdef Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t a) nogil:
    cdef Py_ssize_t r = a
    while parent[r] != r:
        r = parent[r]
    cdef Py_ssize_t nxt
    while parent[a] != r:
        nxt = parent[a]
        parent[a] = r
        a = nxt
    return r


cdef inline void _union(Py_ssize_t[::1] parent, Py_ssize_t a, Py_ssize_t b) nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


cdef inline bint _similar(double[:, :, ::1] v, Py_ssize_t y0, Py_ssize_t x0,
                          Py_ssize_t y1, Py_ssize_t x1, double tol) nogil:
    cdef Py_ssize_t c
    for c in range(v.shape[2]):
        if fabs(v[y0, x0, c] - v[y1, x1, c]) > tol:
            return False
    return True


def label_components(values, valid, double tol, int connectivity):
    cdef double[:, :, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] vm = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef Py_ssize_t h = v.shape[0], w = v.shape[1]
    parent_arr = np.arange(h * w, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    cdef Py_ssize_t y, x, p
    cdef bint eight = connectivity == 8
    for y in range(h):
        for x in range(w):
            if not vm[y, x]:
                continue
            p = y * w + x
            if x + 1 < w and vm[y, x + 1] and _similar(v, y, x, y, x + 1, tol):
                _union(parent, p, p + 1)
            if y + 1 < h:
                if vm[y + 1, x] and _similar(v, y, x, y + 1, x, tol):
                    _union(parent, p, p + w)
                if eight:
                    if x + 1 < w and vm[y + 1, x + 1] and _similar(v, y, x, y + 1, x + 1, tol):
                        _union(parent, p, p + w + 1)
                    if x > 0 and vm[y + 1, x - 1] and _similar(v, y, x, y + 1, x - 1, tol):
                        _union(parent, p, p + w - 1)
    out_arr = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    remap_arr = np.full(h * w, -1, dtype=np.int32)
    cdef int[::1] remap = remap_arr
    cdef int nxt = 0
    cdef Py_ssize_t r
    for y in range(h):
        for x in range(w):
            if not vm[y, x]:
                continue
            r = _find(parent, y * w + x)
            if remap[r] < 0:
                remap[r] = nxt
                nxt += 1
            out[y, x] = remap[r]
    return out_arr


def svm_dual_cd(X, y, upper, orders, double tol):
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    K_arr = Xa @ Xa.T
    cdef double[:, ::1] K = K_arr
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] up = np.ascontiguousarray(upper, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] od = np.ascontiguousarray(orders, dtype=np.int64)
    cdef Py_ssize_t n = K.shape[0]
    alpha_arr = np.zeros(n)
    margin_arr = np.zeros(n)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] margin = margin_arr
    cdef Py_ssize_t p, t, i, j
    cdef int passes = 0
    cdef double g, a, pg, pg_max, pg_min, new, delta
    for p in range(od.shape[0]):
        passes += 1
        pg_max = -1e300
        pg_min = 1e300
        for t in range(od.shape[1]):
            i = od[p, t]
            if K[i, i] <= 0.0:
                continue
            g = yy[i] * margin[i] - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = g if g < 0.0 else 0.0
            elif a >= up[i]:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                new = a - g / K[i, i]
                if new < 0.0:
                    new = 0.0
                if new > up[i]:
                    new = up[i]
                if new != a:
                    delta = (new - a) * yy[i]
                    for j in range(n):
                        margin[j] += delta * K[j, i]
                    alpha[i] = new
        if pg_max - pg_min <= tol:
            break
    return Xa.T @ (alpha_arr * np.asarray(yy)), passes


def bilinear(img, xs, ys):
    cdef double[:, :, ::1] im = np.ascontiguousarray(img, dtype=np.float64)
    cdef double[::1] sx = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] sy = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], nch = im.shape[2]
    cdef Py_ssize_t oh = sy.shape[0], ow = sx.shape[0]
    out_arr = np.empty((oh, ow, nch), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, c, yl, yh, xl, xh
    cdef double fy, fx, top, bot
    with nogil:
        for i in range(oh):
            yl = <Py_ssize_t>floor(sy[i])
            if yl > h - 1:
                yl = h - 1
            yh = yl + 1 if yl < h - 1 else h - 1
            fy = sy[i] - yl
            for j in range(ow):
                xl = <Py_ssize_t>floor(sx[j])
                if xl > w - 1:
                    xl = w - 1
                xh = xl + 1 if xl < w - 1 else w - 1
                fx = sx[j] - xl
                for c in range(nch):
                    top = im[yl, xl, c] * (1 - fx) + im[yl, xh, c] * fx
                    bot = im[yh, xl, c] * (1 - fx) + im[yh, xh, c] * fx
                    out[i, j, c] = top * (1 - fy) + bot * fy
    return out_arr
