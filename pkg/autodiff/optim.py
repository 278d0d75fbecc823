"""
SGD and Adam updates with an explicit descent/ascent direction.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

import numpy as np

from autodiff.tensor import Tensor
from utils.errors import NonFiniteError

logger = logging.getLogger(__name__)

NamedParams = Iterable[Tuple[str, Tensor]]

DIRECTIONS = {"descent": -1.0, "ascent": 1.0}


@dataclass
class OptimizerState:
    """Hyperparameters and moment buffers of one optimizer."""

    kind: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    adam_m: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"optimizer kind must be 'sgd' or 'adam', got {self.kind!r}")
        if self.lr < 0:
            raise ValueError(f"learning rate must be non-negative, got {self.lr}")

    def scalars(self) -> Dict[str, float]:
        return {
            "kind": self.kind,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step_count": self.step_count,
        }


def optimizer_step(state: OptimizerState, named_params: NamedParams, direction: str = "descent") -> None:
    """
    Apply one update to every parameter and zero its gradient.

    All gradients are checked before any parameter changes, so a failed step
    leaves parameters and moments untouched.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be 'descent' or 'ascent', got {direction!r}")
    sign = DIRECTIONS[direction]
    params = list(named_params)

    for name, p in params:
        if p.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient; run backward() first")
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}; step aborted")

    state.step_count += 1
    t = state.step_count
    for name, p in params:
        g = p.grad
        if state.kind == "sgd":
            update = state.lr * g
        else:
            m = state.adam_m.get(name)
            v = state.adam_v.get(name)
            if m is None:
                m = np.zeros_like(p.data)
                v = np.zeros_like(p.data)
            m = state.beta1 * m + (1.0 - state.beta1) * g
            v = state.beta2 * v + (1.0 - state.beta2) * g * g
            state.adam_m[name] = m
            state.adam_v[name] = v
            m_hat = m / (1.0 - state.beta1 ** t)
            v_hat = v / (1.0 - state.beta2 ** t)
            update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.data = (p.data + sign * update).astype(p.data.dtype, copy=False)
        p.grad = None
