"""Time the compiled kernels against the numpy fallback on tracker-sized inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel: best-of-N wall time for each backend and the
speedup of the compiled one.  Outputs of the two backends are compared too.
"""
import argparse
import sys
import timeit

import numpy as np

from rgbdtrack.kernels import compiled_backend, python_backend


def cases(rng):
    img = rng.uniform(0, 255, (256, 336, 3))
    valid = rng.random((256, 336)) > 0.02
    grid = rng.normal(size=(30, 40, 36))
    w = rng.normal(size=(6, 6, 36))
    seg = (rng.integers(0, 5, (96, 96, 3)) * 25).astype(float)
    X = rng.normal(size=(250, 1297))
    y = np.where(rng.random(250) < 0.2, 1.0, -1.0)
    upper = np.where(y > 0, 0.5 / (y > 0).sum(), 0.5 / (y < 0).sum())
    orders = rng.permuted(np.tile(np.arange(250), (200, 1)), axis=1)
    src = rng.uniform(0, 255, (240, 320, 3))
    xs = np.clip(np.linspace(-0.3, 319.5, 420), 0, 319)
    ys = np.clip(np.linspace(-0.3, 239.5, 315), 0, 239)
    return {
        "cell_histograms (rgb 256x336)": ("cell_histograms", (img, None, 8, 9)),
        "cell_histograms (depth, masked)": ("cell_histograms", (img[..., :1], valid, 8, 9)),
        "score_map (30x40 grid, 6x6 template)": ("score_map", (grid, w)),
        "label_components (96x96, 8-conn)": ("label_components", (seg, np.ones((96, 96), bool), 30.0, 8)),
        "svm_dual_cd (250 x 1297)": ("svm_dual_cd", (X, y, upper, orders, 1e-3)),
        "bilinear (240x320 -> 315x420)": ("bilinear", (src, xs, ys)),
    }


def max_diff(a, b):
    if isinstance(a, tuple):
        return max_diff(a[0], b[0])
    return float(np.abs(np.asarray(a, float) - np.asarray(b, float)).max())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled_backend is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max diff':>9s}")
    for label, (name, a) in cases(rng).items():
        fp, fc = getattr(python_backend, name), getattr(compiled_backend, name)
        tp = min(timeit.repeat(lambda: fp(*a), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fc(*a), number=1, repeat=args.repeat))
        d = max_diff(fp(*a), fc(*a))
        print(f"{label:40s} {1e3 * tp:10.2f} {1e3 * tc:10.2f} {tp / tc:7.1f}x {d:9.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
