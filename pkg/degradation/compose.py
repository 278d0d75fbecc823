"""
Multi-step soft composition of banked degradations, plus the textual
degradation specs used for evaluation and dataset synthesis.
"""
import logging
from typing import List, Sequence, Tuple, Union

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor, no_grad
from degradation.bank import SeverityBank, validate_contrast, validate_lowres, validate_stripe
from degradation.operators import apply_operator, stripe_offsets
from utils.errors import ShapeError
from utils.helpers import derive_seed

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-6

DegradationStep = Tuple[str, Tuple[float, ...]]


def check_weights(weights: np.ndarray, batch: int, n_ops: int) -> None:
    """Validate a (B, N_s, N_ops) weight array."""
    if weights.ndim != 3 or weights.shape[0] != batch or weights.shape[2] != n_ops:
        raise ShapeError(f"weights of shape {weights.shape} do not fit batch {batch} and {n_ops} operators")
    rows = weights.sum(axis=2, dtype=np.float64)
    worst = float(np.max(np.abs(rows - 1.0))) if rows.size else 0.0
    if worst > ROW_TOLERANCE:
        raise ValueError(f"weight rows must sum to 1 (worst deviation {worst:.3g})")
    if np.any(weights < -ROW_TOLERANCE):
        raise ValueError("weights must be non-negative")


def compose(x: Tensor, weights: Tensor, bank: SeverityBank, stripe_seed: int) -> Tensor:
    """
    Apply `N_s` sequential steps; step i returns the `weights[:, i]`-weighted
    sum of every banked operator applied to the previous step's output.

    Stripe patterns are drawn per step from `stripe_seed` and are constant
    within a step.
    """
    if x.ndim != 4 or x.shape[1] != 1:
        raise ShapeError(f"compose expects a (B, 1, H, W) batch, got {x.shape}")
    batch, _, _, width = x.shape
    operators = bank.operators()
    check_weights(weights.data, batch, len(operators))

    out = x
    for step in range(weights.shape[1]):
        offsets = stripe_offsets(np.random.default_rng(derive_seed(stripe_seed, step)), (batch, width))
        candidates = [apply_operator(out, family, params, offsets) for family, params in operators]
        stacked = F.concat_channels(candidates)
        row = F.reshape(F.index(weights, (slice(None), step)), (batch, len(operators), 1, 1))
        out = F.reduce_sum(F.mul(stacked, row), axis=1, keepdims=True)
    return out


def uniform_weights(batch: int, steps: int, n_ops: int) -> np.ndarray:
    return np.full((batch, steps, n_ops), 1.0 / n_ops)


def random_one_hot_weights(batch: int, steps: int, n_ops: int, rng: np.random.Generator) -> np.ndarray:
    """One operator per image and step, chosen uniformly."""
    choice = rng.integers(0, n_ops, size=(batch, steps))
    weights = np.zeros((batch, steps, n_ops))
    np.put_along_axis(weights, choice[..., None], 1.0, axis=2)
    return weights


def parse_degradation_spec(text: str) -> List[DegradationStep]:
    """
    Parse `identity`, `stripe:AMP`, `lowres:SCALE` or
    `contrast:FACTOR[:GAMMA]`, joined by `+` for composited corruption.
    """
    if not text or not text.strip():
        raise ValueError("empty degradation spec")
    steps: List[DegradationStep] = []
    for part in text.split("+"):
        fields = [f.strip() for f in part.strip().split(":")]
        family, args = fields[0].lower(), fields[1:]
        try:
            if family == "identity" and not args:
                steps.append(("identity", ()))
            elif family == "stripe" and len(args) == 1:
                amp = float(args[0])
                validate_stripe(amp)
                steps.append(("stripe", (amp,)))
            elif family == "lowres" and len(args) == 1:
                scale = int(args[0])
                validate_lowres(scale)
                steps.append(("lowres", (scale,)))
            elif family == "contrast" and len(args) in (1, 2):
                factor = float(args[0])
                gamma = float(args[1]) if len(args) == 2 else 1.0
                validate_contrast(factor, gamma)
                steps.append(("contrast", (factor, gamma)))
            else:
                raise ValueError("unrecognized family or wrong number of parameters")
        except ValueError as exc:
            raise ValueError(f"bad degradation spec {part.strip()!r}: {exc}") from exc
    return steps


def apply_degradation_spec(
    x: np.ndarray,
    spec: Union[str, Sequence[DegradationStep]],
    seed: int,
) -> np.ndarray:
    """Deterministically corrupt one (H, W) image, steps applied left to right."""
    steps = parse_degradation_spec(spec) if isinstance(spec, str) else list(spec)
    img = np.asarray(x, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected an (H, W) image, got shape {img.shape}")
    out = Tensor(img.reshape(1, 1, *img.shape), dtype=np.float64)
    with no_grad():
        for index, (family, params) in enumerate(steps):
            offsets = stripe_offsets(np.random.default_rng(derive_seed(seed, "stripe", index)), (1, img.shape[1]))
            out = apply_operator(out, family, params, offsets)
    return out.data[0, 0].copy()
