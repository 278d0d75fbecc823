"""
Degradation classifier: maps a clean batch to per-image mixture weights
over the severity bank.
"""
import logging

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor
from networks.layers import Conv2d, Linear, Module
from utils.helpers import check_finite

logger = logging.getLogger(__name__)


class DegradationClassifier(Module):
    """
    Three strided convolutions, global average pooling and a linear head
    producing `steps x n_ops` logits per image, softmax-normalized per step.

    The head starts at zero so the initial weights are uniform.
    """

    def __init__(self, steps: int, n_ops: int, rng: np.random.Generator, widths=(8, 16, 16)):
        super().__init__()
        self.steps = steps
        self.n_ops = n_ops
        self.conv1 = Conv2d(1, widths[0], 3, rng, stride=2)
        self.conv2 = Conv2d(widths[0], widths[1], 3, rng, stride=2)
        self.conv3 = Conv2d(widths[1], widths[2], 3, rng, stride=2)
        self.head = Linear(widths[2], steps * n_ops, rng, zero_init=True)

    def forward(self, x: Tensor) -> Tensor:
        h = F.leaky_relu(self.conv1(x))
        h = F.leaky_relu(self.conv2(h))
        h = F.leaky_relu(self.conv3(h))
        pooled = F.global_avg_pool(h)
        check_finite(pooled.data, "classifier activations")
        logits = F.reshape(self.head(pooled), (x.shape[0], self.steps, self.n_ops))
        return F.softmax(logits, axis=-1)
