"""
Leaky integrate-and-fire neurons and the spiking-guided separation block.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Tuple

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Function, Tensor, no_grad
from networks.layers import Conv2d, Module, TdBatchNorm

logger = logging.getLogger(__name__)

SURROGATE_WIDTH = 0.5


class SpikeFunction(Function):
    """
    Heaviside step at `v_th` with a rectangular surrogate derivative
    `1 / (2 * width)` inside `|u - v_th| <= width`.

    `relaxed=True` replaces the step by the ramp whose derivative is the
    surrogate, so the backward pass can be checked numerically.
    """

    def forward(self, u, v_th: float = 1.0, width: float = SURROGATE_WIDTH, relaxed: bool = False):
        self.saved["window"] = (np.abs(u - v_th) <= width) / (2.0 * width)
        if relaxed:
            return np.clip((u - v_th) / (2.0 * width) + 0.5, 0.0, 1.0)
        return (u >= v_th).astype(u.dtype)

    def backward(self, grad):
        return (grad * self.saved["window"],)


def spike(u: Tensor, v_th: float = 1.0, relaxed: bool = False) -> Tensor:
    return SpikeFunction.apply(u, v_th=v_th, relaxed=relaxed)


@dataclass
class LifState:
    membrane: Tensor
    tau: float = 0.5
    v_th: float = 1.0
    t: int = 0
    time_steps: int = 4

    @classmethod
    def initial(cls, like: Tensor, tau: float = 0.5, v_th: float = 1.0, time_steps: int = 4) -> "LifState":
        return cls(Tensor(np.zeros_like(like.data), _raw=True), tau=tau, v_th=v_th, time_steps=time_steps)


def lif_step(input_current: Tensor, state: LifState, relaxed: bool = False) -> Tuple[Tensor, LifState]:
    """
    One LIF update: `u = tau * u_prev + I`, spike where `u >= v_th`, then a
    hard reset to zero at fired locations.

    The stored membrane is already reset, so `u_prev` carries the
    `(1 - s_prev)` factor. The reset mask is not differentiated.
    """
    if state.v_th <= 0:
        raise ValueError(f"firing threshold must be positive, got {state.v_th}")
    if state.t >= state.time_steps:
        raise ValueError(f"time step {state.t} is outside [0, {state.time_steps})")
    potential = F.add(F.scale(state.membrane, state.tau), input_current)
    spikes = spike(potential, state.v_th, relaxed=relaxed)
    keep = Tensor(1.0 - spikes.data, _raw=True)
    membrane = F.mul(potential, keep)
    return spikes, replace(state, membrane=membrane, t=state.t + 1)


class SpikingSeparation(Module):
    """
    Rate-coded LIF encoding of the features, convolution over the spike
    trains and tdBN, averaged over time and added to the features.
    """

    def __init__(self, channels: int, rng: np.random.Generator, time_steps: int = 4, tau: float = 0.5,
                 v_th: float = 1.0):
        super().__init__()
        if time_steps < 1:
            raise ValueError(f"time_steps must be at least 1, got {time_steps}")
        self.time_steps = time_steps
        self.tau = tau
        self.v_th = v_th
        self.conv = Conv2d(channels, channels, 3, rng, bias=False)
        self.norm = TdBatchNorm(channels, v_th=v_th)

    def encode(self, features: Tensor) -> List[Tensor]:
        state = LifState.initial(features, tau=self.tau, v_th=self.v_th, time_steps=self.time_steps)
        trains = []
        for _ in range(self.time_steps):
            spikes, state = lif_step(features, state)
            trains.append(spikes)
        return trains

    def forward(self, features: Tensor) -> Tensor:
        b, c, h, w = features.shape
        trains = F.concat(self.encode(features), axis=0)
        response = self.norm(self.conv(trains))
        response = F.reduce_mean(F.reshape(response, (self.time_steps, b, c, h, w)), axis=0)
        return F.add(features, response)

    def spike_rates(self, features: Tensor) -> np.ndarray:
        """Mean firing rate per location over the time window."""
        with no_grad():
            trains = self.encode(features)
        return np.mean([s.data for s in trains], axis=0)
