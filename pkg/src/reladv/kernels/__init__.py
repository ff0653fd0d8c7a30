"""Hot kernels with a numba path and a numpy/scipy fallback.

The numba path is used when numba imports and ``RELADV_DISABLE_JIT`` is not
set to a truthy value. Both implementations stay importable through
:func:`numba_kernels` and :func:`numpy_kernels` so they can be compared.
"""
import os
from types import SimpleNamespace

from . import _numpy

NAMES = (
    "reach_mask",
    "weak_labels",
    "strong_labels",
    "best_labeling",
    "greedy_grad_step",
    "greedy_grad_batch",
    "rgb_to_hsv",
    "hsv_to_rgb",
)

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_DISABLED = os.environ.get("RELADV_DISABLE_JIT", "").lower() in ("1", "true", "yes", "on")
USE_NUMBA = numba is not None and not JIT_DISABLED


def numba_kernels() -> SimpleNamespace:
    if numba is None:
        raise RuntimeError("numba is not installed")
    from . import _jit

    return SimpleNamespace(**{name: getattr(_jit, name) for name in NAMES})


def numpy_kernels() -> SimpleNamespace:
    return SimpleNamespace(**{name: getattr(_numpy, name) for name in NAMES})


active = numba_kernels() if USE_NUMBA else numpy_kernels()

reach_mask = active.reach_mask
weak_labels = active.weak_labels
strong_labels = active.strong_labels
best_labeling = active.best_labeling
greedy_grad_step = active.greedy_grad_step
greedy_grad_batch = active.greedy_grad_batch
rgb_to_hsv = active.rgb_to_hsv
hsv_to_rgb = active.hsv_to_rgb
