"""
Training criterion `alpha * L1 + beta * (1 - SSIM)` and the generator's
negated objective.
"""
import logging
from dataclasses import dataclass

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor
from metrics import constants as C
from metrics.quality import fspecial_gaussian
from utils.errors import ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.75
    beta: float = 1.1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"loss weights must be non-negative, got alpha={self.alpha}, beta={self.beta}")


def _check_pair(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"loss operands differ in shape: {a.shape} vs {b.shape}")
    if a.ndim != 4 or a.shape[1] != 1:
        raise ShapeError(f"loss expects (B, 1, H, W) batches, got {a.shape}")


def ssim_tensor(a: Tensor, b: Tensor) -> Tensor:
    """Mean single-scale SSIM over a batch, differentiable in both inputs."""
    _check_pair(a, b)
    if min(a.shape[2:]) < C.SSIM_WINDOW:
        raise ShapeError(f"SSIM needs images of at least {C.SSIM_WINDOW}x{C.SSIM_WINDOW}, got {a.shape[2:]}")
    window = fspecial_gaussian(C.SSIM_WINDOW, C.SSIM_SIGMA)
    kernel = Tensor(window.reshape(1, 1, C.SSIM_WINDOW, C.SSIM_WINDOW), dtype=a.data.dtype)

    mu_a = F.conv2d(a, kernel)
    mu_b = F.conv2d(b, kernel)
    mu_a2 = F.mul(mu_a, mu_a)
    mu_b2 = F.mul(mu_b, mu_b)
    mu_ab = F.mul(mu_a, mu_b)
    var_a = F.sub(F.conv2d(F.mul(a, a), kernel), mu_a2)
    var_b = F.sub(F.conv2d(F.mul(b, b), kernel), mu_b2)
    cov = F.sub(F.conv2d(F.mul(a, b), kernel), mu_ab)

    numerator = F.mul(F.add(F.scale(mu_ab, 2.0), C.SSIM_C1), F.add(F.scale(cov, 2.0), C.SSIM_C2))
    denominator = F.mul(F.add(F.add(mu_a2, mu_b2), C.SSIM_C1), F.add(F.add(var_a, var_b), C.SSIM_C2))
    return F.reduce_mean(F.div(numerator, denominator))


def loss_total(y_hat: Tensor, y: Tensor, weights: LossWeights = LossWeights()) -> Tensor:
    _check_pair(y_hat, y)
    pixel = F.reduce_mean(F.absolute(F.sub(y_hat, y)))
    loss = F.scale(pixel, weights.alpha)
    if weights.beta:
        structural = F.add(F.scale(ssim_tensor(y_hat, y), -1.0), 1.0)
        loss = F.add(loss, F.scale(structural, weights.beta))
    return loss


def loss_generator(
    y_hat: Tensor,
    y: Tensor,
    x_hat: Tensor,
    x: Tensor,
    weights: LossWeights = LossWeights(),
    lambda_reg: float = 0.1,
) -> Tensor:
    """`-L(y_hat, y) + lambda_reg * L(x_hat, x)`; minimizing it ascends the enhancement loss."""
    objective = F.scale(loss_total(y_hat, y, weights), -1.0)
    if lambda_reg:
        objective = F.add(objective, F.scale(loss_total(x_hat, x, weights), lambda_reg))
    return objective
