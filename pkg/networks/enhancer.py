"""
Enhancement network: stem, two scale-transform / spiking-separation pairs
with dense connections, and a zero-initialized residual head.
"""
import logging
from typing import Dict

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor, no_grad, precision
from networks.layers import Conv2d, Module
from networks.spiking import SpikingSeparation
from utils.errors import ShapeError

logger = logging.getLogger(__name__)


class ScaleTransform(Module):
    """Half-resolution and full-resolution branches fused with the input by a 1x1 conv."""

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.down_conv = Conv2d(channels, channels, 3, rng)
        self.full_conv = Conv2d(channels, channels, 3, rng)
        self.fuse = Conv2d(3 * channels, channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        _, _, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"scale transform needs even extents, got {h}x{w}")
        coarse = F.resample2(F.leaky_relu(self.down_conv(F.resample2(x, "down"))), "up")
        fine = F.leaky_relu(self.full_conv(x))
        return F.leaky_relu(self.fuse(F.concat_channels([x, coarse, fine])))

class DualInteractionNet(Module):
    def __init__(self, rng: np.random.Generator, width: int = 16, time_steps: int = 4, tau: float = 0.5,
                 v_th: float = 1.0):
        super().__init__()
        self.width = width
        self.stem = Conv2d(1, width, 3, rng)
        self.stm1 = ScaleTransform(width, rng)
        self.ssm1 = SpikingSeparation(width, rng, time_steps=time_steps, tau=tau, v_th=v_th)
        self.dense1 = Conv2d(2 * width, width, 1, rng)
        self.stm2 = ScaleTransform(width, rng)
        self.ssm2 = SpikingSeparation(width, rng, time_steps=time_steps, tau=tau, v_th=v_th)
        self.dense2 = Conv2d(3 * width, width, 1, rng)
        self.head = Conv2d(width, 1, 3, rng, zero_init=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 1:
            raise ShapeError(f"enhancer expects a (B, 1, H, W) batch, got {x.shape}")
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ShapeError(f"enhancer needs extents divisible by 4, got {x.shape[2]}x{x.shape[3]}")
        f0 = F.leaky_relu(self.stem(x))
        f1 = self.ssm1(self.stm1(f0))
        g1 = F.leaky_relu(self.dense1(F.concat_channels([f0, f1])))
        f2 = self.ssm2(self.stm2(g1))
        g2 = F.leaky_relu(self.dense2(F.concat_channels([f0, f1, f2])))
        return F.clamp(F.add(x, self.head(g2)))


def enhance(image: np.ndarray, enhancer: DualInteractionNet) -> np.ndarray:
    """Enhance one (H, W) image in float64 with frozen statistics."""
    was_training = enhancer.training
    enhancer.eval()
    try:
        with precision(np.float64), no_grad():
            x = Tensor(np.asarray(image, dtype=np.float64)[None, None])
            return enhancer(x).data[0, 0].copy()
    finally:
        enhancer.train(was_training)


def parameter_census(module: Module) -> Dict[str, int]:
    """Parameter count per top-level child plus the total."""
    census = {name: child.num_parameters() for name, child in module._modules.items()}
    census["total"] = module.num_parameters()
    return census
