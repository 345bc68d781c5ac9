"""Hot kernels: compiled extension when available, numpy fallback otherwise.

Set ``RGBDTRACK_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` names the
implementation in use; ``python_backend`` and ``compiled_backend`` give direct
access for tests and benchmarks (the latter is None if the extension is not built).
"""
import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:
    compiled_backend = None

if compiled_backend is not None and os.environ.get("RGBDTRACK_PURE_PYTHON", "") in ("", "0"):
    _impl = compiled_backend
    BACKEND = "cython"
else:
    _impl = python_backend
    BACKEND = "python"

cell_histograms = _impl.cell_histograms
# the numpy version rides on BLAS and beats the compiled loop (see benchmarks/)
score_map = python_backend.score_map
label_components = _impl.label_components
svm_dual_cd = _impl.svm_dual_cd
bilinear = _impl.bilinear

__all__ = [
    "BACKEND", "cell_histograms", "score_map", "label_components", "svm_dual_cd", "bilinear",
    "python_backend", "compiled_backend",
]
