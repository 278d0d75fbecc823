"""
Full-reference and no-reference image quality metrics.

All functions take (H, W) float images on the unit scale and compute in
float64. They are pure and safe to call concurrently.
"""
import logging
import math

import numpy as np
from scipy.signal import convolve2d

from metrics import constants as C
from utils.errors import ShapeError

logger = logging.getLogger(__name__)


def _prepare(*images: np.ndarray):
    arrays = [np.asarray(img, dtype=np.float64) for img in images]
    for arr in arrays:
        if arr.ndim != 2:
            raise ShapeError(f"metrics expect (H, W) images, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty image")
    if any(arr.shape != arrays[0].shape for arr in arrays[1:]):
        raise ShapeError(f"image shapes differ: {[a.shape for a in arrays]}")
    return arrays


def fspecial_gaussian(size: int, sigma: float) -> np.ndarray:
    """Normalized Gaussian window, as MATLAB's fspecial('gaussian')."""
    m = (size - 1.0) / 2.0
    y, x = np.ogrid[-m:m + 1, -m:m + 1]
    h = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    h[h < np.finfo(h.dtype).eps * h.max()] = 0
    return h / h.sum()


def quantize8(img: np.ndarray) -> np.ndarray:
    """Round-half-up to integer levels 0..255."""
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.int64)


def _entropy_bits(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def metric_ssim(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _prepare(a, b)
    if min(a.shape) < C.SSIM_WINDOW:
        raise ShapeError(f"SSIM needs images of at least {C.SSIM_WINDOW}x{C.SSIM_WINDOW}, got {a.shape}")
    win = fspecial_gaussian(C.SSIM_WINDOW, C.SSIM_SIGMA)
    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a * mu_a
    var_b = convolve2d(b * b, win, mode="valid") - mu_b * mu_b
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b
    numerator = (2 * mu_a * mu_b + C.SSIM_C1) * (2 * cov + C.SSIM_C2)
    denominator = (mu_a * mu_a + mu_b * mu_b + C.SSIM_C1) * (var_a + var_b + C.SSIM_C2)
    return float(np.mean(numerator / denominator))


def metric_en(a: np.ndarray) -> float:
    (a,) = _prepare(a)
    return _entropy_bits(np.bincount(quantize8(a).ravel(), minlength=C.HIST_LEVELS))


def metric_sd(a: np.ndarray) -> float:
    (a,) = _prepare(a)
    return float(np.std(a))


def metric_mi(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _prepare(a, b)
    qa, qb = quantize8(a).ravel(), quantize8(b).ravel()
    joint = np.bincount(qa * C.HIST_LEVELS + qb, minlength=C.HIST_LEVELS ** 2).reshape(C.HIST_LEVELS, C.HIST_LEVELS)
    pxy = joint / joint.sum()
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    nz = pxy > 0
    outer = px[:, None] * py[None, :]
    return float(np.sum(pxy[nz] * np.log2(pxy[nz] / outer[nz])))


def _sobel(img: np.ndarray):
    gx = convolve2d(img, np.array(C.SOBEL_X, dtype=np.float64), mode="same", boundary="symm")
    gy = convolve2d(img, np.array(C.SOBEL_Y, dtype=np.float64), mode="same", boundary="symm")
    magnitude = np.sqrt(gx * gx + gy * gy)
    # orientation folded into (-pi/2, pi/2]
    alpha = np.arctan2(gy, gx)
    alpha = np.where(alpha > np.pi / 2, alpha - np.pi, alpha)
    alpha = np.where(alpha <= -np.pi / 2, alpha + np.pi, alpha)
    return magnitude, alpha


def metric_qabf(fused: np.ndarray, src: np.ndarray) -> float:
    """Edge-transfer quality of `fused` against a single source image."""
    fused, src = _prepare(fused, src)
    g_f, a_f = _sobel(fused)
    g_s, a_s = _sobel(src)
    g_s[g_s < C.QABF_FLAT_EPS] = 0.0
    g_f[g_f < C.QABF_FLAT_EPS] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        strength = np.where(
            np.maximum(g_s, g_f) > 0, np.minimum(g_s, g_f) / np.maximum(g_s, g_f), 0.0
        )
    orientation = 1.0 - np.abs(a_s - a_f) / (np.pi / 2)
    q_g = C.QABF_GG / (1.0 + np.exp(-C.QABF_KG * (strength - C.QABF_SG)))
    q_a = C.QABF_GA / (1.0 + np.exp(-C.QABF_KA * (orientation - C.QABF_SA)))
    weight = g_s ** C.QABF_L
    total = float(weight.sum())
    if total == 0.0:
        return 0.0
    return float(np.sum(q_g * q_a * weight) / total)


def _pearson(u: np.ndarray, v: np.ndarray) -> float:
    du = u - u.mean()
    dv = v - v.mean()
    denom = math.sqrt(float(np.sum(du * du)) * float(np.sum(dv * dv)))
    if denom == 0.0:
        return 0.0
    return float(np.sum(du * dv) / denom)


def metric_scd(fused: np.ndarray, src_a: np.ndarray, src_b: np.ndarray) -> float:
    """Sum of the correlations of differences."""
    fused, src_a, src_b = _prepare(fused, src_a, src_b)
    return _pearson(fused - src_b, src_a) + _pearson(fused - src_a, src_b)


def metric_vif(ref: np.ndarray, dist: np.ndarray) -> float:
    """Multi-scale pixel-domain visual information fidelity."""
    ref, dist = _prepare(ref, dist)
    ref = ref * C.VIF_DATA_SCALE
    dist = dist * C.VIF_DATA_SCALE
    eps = C.VIF_EPS
    num = 0.0
    den = 0.0
    for scale in range(1, C.VIF_SCALES + 1):
        n = 2 ** (C.VIF_SCALES - scale + 1) + 1
        win = fspecial_gaussian(n, n / 5.0)
        if scale > 1:
            ref = convolve2d(ref, win, mode="valid")[::2, ::2]
            dist = convolve2d(dist, win, mode="valid")[::2, ::2]
        if min(ref.shape) < n:
            raise ValueError(f"image too small for VIF at scale {scale}")

        mu1 = convolve2d(ref, win, mode="valid")
        mu2 = convolve2d(dist, win, mode="valid")
        sigma1_sq = np.maximum(convolve2d(ref * ref, win, mode="valid") - mu1 * mu1, 0.0)
        sigma2_sq = np.maximum(convolve2d(dist * dist, win, mode="valid") - mu2 * mu2, 0.0)
        sigma12 = convolve2d(ref * dist, win, mode="valid") - mu1 * mu2

        g = sigma12 / (sigma1_sq + eps)
        sv_sq = sigma2_sq - g * sigma12

        flat_ref = sigma1_sq < eps
        g[flat_ref] = 0
        sv_sq[flat_ref] = sigma2_sq[flat_ref]
        sigma1_sq[flat_ref] = 0

        flat_dist = sigma2_sq < eps
        g[flat_dist] = 0
        sv_sq[flat_dist] = 0

        negative = g < 0
        sv_sq[negative] = sigma2_sq[negative]
        g[negative] = 0
        sv_sq[sv_sq <= eps] = eps

        num += float(np.sum(np.log10(1 + g * g * sigma1_sq / (sv_sq + C.VIF_SIGMA_NSQ))))
        den += float(np.sum(np.log10(1 + sigma1_sq / C.VIF_SIGMA_NSQ)))
    if den == 0.0:
        return 0.0
    return num / den


def metric_psnr(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _prepare(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
