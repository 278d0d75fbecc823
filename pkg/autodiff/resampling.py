"""
Separable interpolation matrices for bilinear and bicubic resizing.

A resize of an (H, W) plane to (H', W') is `M_h @ X @ M_w.T`, which keeps
the operation linear in the image and trivially differentiable.
"""
import logging
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Keys cubic convolution coefficient, the value MATLAB and PIL use.
CUBIC_A = -0.5


def _cubic(x: float) -> float:
    x = abs(x)
    if x <= 1.0:
        return (CUBIC_A + 2.0) * x ** 3 - (CUBIC_A + 3.0) * x ** 2 + 1.0
    if x < 2.0:
        return CUBIC_A * x ** 3 - 5.0 * CUBIC_A * x ** 2 + 8.0 * CUBIC_A * x - 4.0 * CUBIC_A
    return 0.0


def _linear(x: float) -> float:
    x = abs(x)
    return 1.0 - x if x < 1.0 else 0.0


_KERNELS: Dict[str, Tuple[Callable[[float], float], float]] = {
    "bicubic": (_cubic, 2.0),
    "bilinear": (_linear, 1.0),
}


@lru_cache(maxsize=64)
def interpolation_matrix(n_in: int, n_out: int, method: str = "bicubic", antialias: bool = True) -> np.ndarray:
    """
    Build the (n_out, n_in) resampling matrix along one axis.

    Pixel centres are aligned (half-pixel convention), out-of-range taps are
    clamped to the border, and every row is normalized to sum to one so that
    constant images are preserved. When shrinking with `antialias`, the
    kernel is stretched by the reduction factor as in MATLAB's imresize.
    """
    if method not in _KERNELS:
        raise ValueError(f"unknown interpolation method {method!r}")
    if n_in < 1 or n_out < 1:
        raise ValueError(f"extents must be positive, got {n_in} -> {n_out}")

    kernel, support = _KERNELS[method]
    scale = n_out / n_in
    stretch = 1.0 / scale if (antialias and scale < 1.0) else 1.0

    matrix = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        center = (i + 0.5) / scale - 0.5
        first = int(np.floor(center - support * stretch))
        last = int(np.ceil(center + support * stretch))
        for k in range(first, last + 1):
            weight = kernel((center - k) / stretch)
            if weight != 0.0:
                matrix[i, min(max(k, 0), n_in - 1)] += weight
        matrix[i] /= matrix[i].sum()

    matrix.setflags(write=False)
    return matrix
