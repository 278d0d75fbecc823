"""
Central finite-difference verification of reverse-mode gradients.

Each check draws a random projection `R` of the output, differentiates
`sum(out * R)` with `backward` and compares against central differences
with step `h = 1e-3 * max(1, |x|)`, everything in float64.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from autodiff import functional as F
from autodiff.resampling import interpolation_matrix
from autodiff.tensor import Tensor, backward, no_grad, precision

logger = logging.getLogger(__name__)

STEP = 1e-3
# Stacked leaky units: a 1e-3 step crosses a kink in a few percent of coordinates
KINKED_STEP = 1e-5
TOLERANCE = 1e-4
KINK_MARGIN = 0.05

Leaf = Tuple[str, Tensor]


@dataclass
class GradCheckResult:
    name: str
    instance: int
    max_rel_error: float
    passed: bool

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return f"{status:4s} {self.name}[{self.instance}] rel_err={self.max_rel_error:.2e}"


def _compare(name: str, instance: int, leaves: Sequence[Leaf], evaluate: Callable[[], Tensor],
             rng: np.random.Generator, tol: float, step: float = STEP) -> GradCheckResult:
    for _, leaf in leaves:
        leaf.requires_grad = True
        leaf.grad = None
    out = evaluate()
    projection = rng.standard_normal(out.shape)
    backward(F.reduce_sum(F.mul(out, Tensor(projection, dtype=np.float64))))

    worst = 0.0
    for label, leaf in leaves:
        analytic = np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad
        numeric = np.zeros_like(leaf.data)
        flat = leaf.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            h = step * max(1.0, abs(original))
            with no_grad():
                flat[i] = original + h
                plus = float(np.sum(evaluate().data * projection))
                flat[i] = original - h
                minus = float(np.sum(evaluate().data * projection))
            flat[i] = original
            numeric.reshape(-1)[i] = (plus - minus) / (2.0 * h)
        scale = max(float(np.max(np.abs(numeric), initial=0.0)), float(np.max(np.abs(analytic), initial=0.0)), 1e-8)
        error = float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale
        if error > tol:
            logger.debug(f"{name}[{instance}] {label}: rel_err={error:.2e}")
        worst = max(worst, error)
    return GradCheckResult(name, instance, worst, worst < tol)


def check_gradients(name: str, fn: Callable[..., Tensor], inputs: Sequence[np.ndarray],
                    rng: np.random.Generator, instance: int = 0, tol: float = TOLERANCE) -> GradCheckResult:
    """Check `fn(*tensors)` against finite differences in every input."""
    with precision(np.float64):
        leaves = [(f"input{i}", Tensor(np.array(x, dtype=np.float64))) for i, x in enumerate(inputs)]
        tensors = [t for _, t in leaves]
        return _compare(name, instance, leaves, lambda: fn(*tensors), rng, tol)


def check_module_gradients(name: str, module, fn: Callable[..., Tensor], inputs: Sequence[np.ndarray],
                           rng: np.random.Generator, instance: int = 0, tol: float = TOLERANCE, step: float = STEP) -> GradCheckResult:
    """Check `fn(*tensors)` in the inputs and in every parameter of a float64 `module`."""
    with precision(np.float64):
        inputs_ = [(f"input{i}", Tensor(np.array(x, dtype=np.float64))) for i, x in enumerate(inputs)]
        tensors = [t for _, t in inputs_]
        leaves = list(module.named_parameters()) + inputs_
        result = _compare(name, instance, leaves, lambda: fn(*tensors), rng, tol, step)
    module.zero_grad()
    return result


def away_from(values: np.ndarray, kinks: Sequence[float], margin: float = KINK_MARGIN) -> np.ndarray:
    """Nudge entries that fall within `margin` of a non-differentiable point."""
    out = np.array(values, dtype=np.float64)
    for k in kinks:
        close = np.abs(out - k) < margin
        out[close] = k + np.where(out[close] >= k, margin, -margin) * 2.0
    return out


def _cases(rng: np.random.Generator) -> List[Tuple[str, Callable[..., Tensor], List[np.ndarray]]]:
    # imported here: the network and loss modules build on this package
    from degradation.bank import SeverityBank
    from degradation.compose import compose
    from losses.objectives import LossWeights, loss_total
    from networks.spiking import LifState, lif_step, spike

    n = rng.standard_normal
    u = rng.uniform
    small_bank = SeverityBank(stripe=(0.15,), lowres=(2,), contrast=((0.5, 1.2),))
    cases = [
        ("add", F.add, [n((2, 3)), n((2, 3))]),
        ("add_broadcast", F.add, [n((2, 3)), n((1, 3))]),
        ("sub", F.sub, [n((2, 3)), n((2, 3))]),
        ("mul", F.mul, [n((2, 3)), n((2, 3))]),
        ("div", F.div, [n((2, 3)), u(0.5, 2.0, (2, 3))]),
        ("scale", lambda a: F.scale(a, -1.7), [n((3, 2))]),
        ("pow", lambda a: F.power(a, 1.5), [u(0.2, 1.5, (3, 2))]),
        ("abs", F.absolute, [away_from(n((3, 3)), [0.0])]),
        ("sigmoid", F.sigmoid, [n((3, 3))]),
        ("relu", F.relu, [away_from(n((3, 3)), [0.0])]),
        ("leaky_relu", F.leaky_relu, [away_from(n((3, 3)), [0.0])]),
        ("clamp", F.clamp, [away_from(u(-0.5, 1.5, (3, 3)), [0.0, 1.0])]),
        ("conv2d", lambda x, w, b: F.conv2d(x, w, b, stride=1, padding=1), [n((1, 2, 5, 5)), n((3, 2, 3, 3)), n(3)]),
        ("conv2d_stride2", lambda x, w: F.conv2d(x, w, stride=2, padding=1), [n((2, 2, 6, 6)), n((2, 2, 3, 3))]),
        ("resample2_up", lambda x: F.resample2(x, "up"), [n((1, 1, 3, 3))]),
        ("resample2_down", lambda x: F.resample2(x, "down"), [n((1, 2, 4, 4))]),
        ("resize_bicubic", _bicubic_shrink, [n((1, 1, 8, 8))]),
        ("matmul", F.matmul, [n((2, 3)), n((3, 2))]),
        ("transpose", F.transpose, [n((2, 3))]),
        ("reduce_mean", lambda a: F.reduce_mean(a, axis=1), [n((3, 4))]),
        ("reduce_sum", lambda a: F.reduce_sum(a, axis=(0, 2), keepdims=True), [n((2, 3, 4))]),
        ("softmax", lambda a: F.softmax(a, axis=-1), [n((2, 5))]),
        ("concat_channels", lambda a, b: F.concat_channels([a, b]), [n((1, 2, 3, 3)), n((1, 1, 3, 3))]),
        ("global_avg_pool", F.global_avg_pool, [n((2, 3, 4, 4))]),
        ("batch_norm", lambda x, g, b: F.batch_norm(x, g, b), [n((3, 2, 3, 3)), u(0.5, 1.5, 2), n(2)]),
        ("td_batch_norm", lambda x, g, b: F.batch_norm(x, g, b, scale=1.5), [n((3, 2, 3, 3)), u(0.5, 1.5, 2), n(2)]),
        ("spike_surrogate", lambda v: spike(v, 1.0, relaxed=True), [away_from(u(0.0, 2.0, (4, 4)), [0.5, 1.5])]),
        ("lif_step", lambda i: lif_step(i, LifState.initial(i), relaxed=True)[0],
         [away_from(u(0.0, 2.0, (1, 2, 3, 3)), [0.5, 1.5])]),
        ("compose", lambda x, logits: compose(x, F.softmax(logits, axis=-1), small_bank, stripe_seed=7),
         [u(0.3, 0.7, (2, 1, 8, 8)), n((2, 2, small_bank.n_ops)) * 0.1]),
        ("loss_total", lambda a, b: loss_total(a, b, LossWeights()), _loss_pair(rng)),
    ]
    return cases


def _bicubic_shrink(x: Tensor) -> Tensor:
    rows = interpolation_matrix(x.shape[2], x.shape[2] // 2)
    cols = interpolation_matrix(x.shape[3], x.shape[3] // 2)
    return F.resize(x, rows, cols)


def run_suite(seed: int = 0, instances: int = 3, tol: float = TOLERANCE) -> List[GradCheckResult]:
    """Run every gradient check on `instances` seeded random inputs."""
    results: List[GradCheckResult] = []
    for instance in range(instances):
        rng = np.random.default_rng([seed, instance])
        for name, fn, inputs in _cases(rng):
            result = check_gradients(name, fn, inputs, rng, instance=instance, tol=tol)
            logger.info(str(result))
            results.append(result)
        results.append(_stm_case(rng, instance, tol))
    failed = [r for r in results if not r.passed]
    logger.info(f"gradcheck: {len(results) - len(failed)}/{len(results)} passed")
    return results


def _stm_case(rng: np.random.Generator, instance: int, tol: float) -> GradCheckResult:
    from networks.enhancer import ScaleTransform

    with precision(np.float64):
        block = ScaleTransform(2, rng)
    features = rng.standard_normal((1, 2, 4, 4))
    result = check_module_gradients("stm", block, lambda f: block(f), [features], rng, instance=instance, tol=tol,
                                    step=KINKED_STEP)
    logger.info(str(result))
    return result


def _loss_pair(rng: np.random.Generator) -> List[np.ndarray]:
    target = rng.uniform(0.0, 1.0, (1, 1, 12, 12))
    offset = away_from(rng.normal(0.0, 0.2, target.shape), [0.0])
    return [target + offset, target]
