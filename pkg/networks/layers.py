"""
Module container and the parameterized layers both networks are built from.
"""
import logging
from collections import OrderedDict
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor, get_default_dtype
from utils.errors import CheckpointError

logger = logging.getLogger(__name__)


def parameter(data: np.ndarray, name: Optional[str] = None) -> Tensor:
    """Wrap an array as a trainable leaf tensor in the default precision."""
    tensor = Tensor(data, requires_grad=True, name=name)
    tensor.is_parameter = True
    return tensor


class Module:
    """
    Base class with a registry of parameters, buffers and child modules.

    Attributes assigned as parameter tensors or `Module`s are registered in
    assignment order, which fixes the order of `named_parameters`.
    """

    def __init__(self):
        object.__setattr__(self, "_parameters", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "training", True)
        object.__setattr__(self, "track_stats", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.is_parameter:
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def forward(self, *args, **kwargs):
        raise NotImplementedError(f"{type(self).__name__} has no forward")

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, p in self._parameters.items():
            yield prefix + name, p
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix + name + ".")

    def parameters(self) -> Iterator[Tensor]:
        for _, p in self.named_parameters():
            yield p

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, module in self._modules.items():
            yield from module.named_buffers(prefix + name + ".")

    def modules(self) -> Iterator["Module"]:
        yield self
        for module in self._modules.values():
            yield from module.modules()

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            object.__setattr__(module, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def set_track_stats(self, flag: bool) -> "Module":
        for module in self.modules():
            object.__setattr__(module, "track_stats", flag)
        return self

    def requires_grad_(self, flag: bool = True) -> "Module":
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())
        for name, b in self.named_buffers():
            state["buffer:" + name] = b.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copy arrays into parameters and buffers; names and shapes must match exactly."""
        expected = {name for name, _ in self.named_parameters()}
        expected |= {"buffer:" + name for name, _ in self.named_buffers()}
        missing = expected - set(state)
        unexpected = set(state) - expected
        if missing or unexpected:
            raise CheckpointError(
                f"state mismatch: missing {sorted(missing)[:5]}, unexpected {sorted(unexpected)[:5]}"
            )
        for name, p in self.named_parameters():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise CheckpointError(f"parameter {name!r}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.data.dtype, copy=True)
        for name, b in self.named_buffers():
            value = np.asarray(state["buffer:" + name])
            if value.shape != b.shape:
                raise CheckpointError(f"buffer {name!r}: shape {value.shape} != {b.shape}")
            b[...] = value


class Conv2d(Module):
    """Square-kernel convolution, padded to keep extents at stride 1 by default."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: Optional[int] = None,
        bias: bool = True,
        zero_init: bool = False,
    ):
        super().__init__()
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        bound = 1.0 / np.sqrt(in_channels * kernel_size * kernel_size)
        if zero_init:
            self.weight = parameter(np.zeros(shape))
        else:
            self.weight = parameter(rng.uniform(-bound, bound, size=shape))
        self.bias = None
        if bias:
            init = np.zeros(out_channels) if zero_init else rng.uniform(-bound, bound, size=out_channels)
            self.bias = parameter(init)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Linear(Module):
    """y = x W^T + b."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, zero_init: bool = False):
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        if zero_init:
            self.weight = parameter(np.zeros((out_features, in_features)))
            self.bias = parameter(np.zeros(out_features))
        else:
            self.weight = parameter(rng.uniform(-bound, bound, size=(out_features, in_features)))
            self.bias = parameter(rng.uniform(-bound, bound, size=out_features))

    def forward(self, x: Tensor) -> Tensor:
        return F.add(F.matmul(x, F.transpose(self.weight)), self.bias)


class TdBatchNorm(Module):
    """
    Threshold-dependent batch norm: normalize, scale by `v_th`, then apply
    the learnable affine map.
    """

    def __init__(self, channels: int, v_th: float = 1.0, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.v_th = v_th
        self.momentum = momentum
        self.eps = eps
        self.gamma = parameter(np.ones(channels))
        self.beta = parameter(np.zeros(channels))
        self.register_buffer("running_mean", np.zeros(channels, dtype=get_default_dtype()))
        self.register_buffer("running_var", np.ones(channels, dtype=get_default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(
            x,
            self.gamma,
            self.beta,
            training=self.training,
            running_mean=self.running_mean,
            running_var=self.running_var,
            momentum=self.momentum,
            eps=self.eps,
            scale=self.v_th,
            track_stats=self.track_stats,
        )

