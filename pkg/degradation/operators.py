"""
Thermal degradation operators.

The `*_tensor` functions act on (B, 1, H, W) tensors inside the training
graph; the `degrade_*` functions wrap them for single (H, W) images and run
in float64 without recording a graph.
"""
import logging
from functools import lru_cache
from typing import Tuple

import numpy as np

from autodiff import functional as F
from autodiff.resampling import interpolation_matrix
from autodiff.tensor import Tensor, no_grad
from degradation.bank import validate_contrast, validate_lowres, validate_stripe
from utils.errors import ShapeError

logger = logging.getLogger(__name__)


def stripe_offsets(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Per-column bias pattern drawn from Uniform(-1, 1)."""
    return rng.uniform(-1.0, 1.0, size=shape)


@lru_cache(maxsize=32)
def lowres_matrix(n: int, scale: int) -> np.ndarray:
    """Bicubic shrink by `scale` followed by bicubic enlarge back to `n`."""
    if n % scale:
        raise ShapeError(f"extent {n} is not divisible by lowres scale {scale}")
    down = interpolation_matrix(n, n // scale, "bicubic")
    up = interpolation_matrix(n // scale, n, "bicubic")
    matrix = up @ down
    matrix.setflags(write=False)
    return matrix


def stripe_tensor(x: Tensor, amplitude: float, offsets: np.ndarray) -> Tensor:
    """Add `amplitude * offsets[b, c]` to every row of column c of image b."""
    b, _, _, w = x.shape
    if offsets.shape != (b, w):
        raise ShapeError(f"stripe offsets {offsets.shape} do not match batch {b} x width {w}")
    pattern = Tensor(amplitude * offsets.reshape(b, 1, 1, w), dtype=x.data.dtype)
    return F.clamp(F.add(x, pattern))


def lowres_tensor(x: Tensor, scale: int) -> Tensor:
    _, _, h, w = x.shape
    if h % scale or w % scale:
        raise ShapeError(f"lowres x{scale} needs extents divisible by {scale}, got {h}x{w}")
    return F.clamp(F.resize(x, lowres_matrix(h, scale), lowres_matrix(w, scale)))


def contrast_tensor(x: Tensor, factor: float, gamma: float) -> Tensor:
    """`m + factor * (x**gamma - m)` with `m` the per-image mean of `x**gamma`."""
    curved = x if gamma == 1.0 else F.power(x, gamma)
    mean = F.reduce_mean(curved, axis=(1, 2, 3), keepdims=True)
    return F.clamp(F.add(mean, F.scale(F.sub(curved, mean), factor)))


def apply_operator(x: Tensor, family: str, params: Tuple[float, ...], offsets: np.ndarray) -> Tensor:
    if family == "identity":
        return x
    if family == "stripe":
        return stripe_tensor(x, params[0], offsets)
    if family == "lowres":
        return lowres_tensor(x, int(params[0]))
    if family == "contrast":
        return contrast_tensor(x, params[0], params[1])
    raise ValueError(f"unknown degradation family {family!r}")


def _as_batch(x: np.ndarray) -> Tensor:
    img = np.asarray(x, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected an (H, W) image, got shape {img.shape}")
    return Tensor(img.reshape(1, 1, *img.shape), dtype=np.float64)


def degrade_stripe(x: np.ndarray, amplitude: float, column_seed: int) -> np.ndarray:
    validate_stripe(amplitude)
    offsets = stripe_offsets(np.random.default_rng(column_seed), (1, np.shape(x)[-1]))
    with no_grad():
        return stripe_tensor(_as_batch(x), amplitude, offsets).data[0, 0]


def degrade_lowres(x: np.ndarray, scale: int) -> np.ndarray:
    validate_lowres(scale)
    with no_grad():
        return lowres_tensor(_as_batch(x), scale).data[0, 0]


def degrade_contrast(x: np.ndarray, factor: float, gamma: float = 1.0) -> np.ndarray:
    validate_contrast(factor, gamma)
    with no_grad():
        return contrast_tensor(_as_batch(x), factor, gamma).data[0, 0]
