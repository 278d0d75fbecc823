import numpy as np
import pytest

from autodiff.optim import OptimizerState, optimizer_step
from autodiff.tensor import Tensor, precision
from utils.errors import NonFiniteError


def _param(value, grad):
    with precision(np.float64):
        p = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
    p.grad = np.array(grad, dtype=np.float64)
    return p


class TestSgd:
    def test_descent(self):
        p = _param([1.0], [2.0])
        optimizer_step(OptimizerState("sgd", 0.1), [("p", p)], "descent")
        np.testing.assert_allclose(p.data, [0.8])

    def test_ascent(self):
        p = _param([1.0], [2.0])
        optimizer_step(OptimizerState("sgd", 0.1), [("p", p)], "ascent")
        np.testing.assert_allclose(p.data, [1.2])

    def test_zero_learning_rate_leaves_parameters(self):
        p = _param([1.0, -3.0], [2.0, 5.0])
        optimizer_step(OptimizerState("sgd", 0.0), [("p", p)])
        np.testing.assert_array_equal(p.data, [1.0, -3.0])

    def test_ascent_then_descent_restores_parameters(self, rng):
        start = rng.standard_normal((3, 4))
        grad = rng.standard_normal((3, 4))
        p = _param(start.copy(), grad)
        state = OptimizerState("sgd", 0.05)
        optimizer_step(state, [("p", p)], "ascent")
        p.grad = grad.copy()
        optimizer_step(state, [("p", p)], "descent")
        np.testing.assert_allclose(p.data, start, rtol=0, atol=1e-12)

    def test_gradients_cleared_after_step(self):
        p = _param([1.0], [2.0])
        optimizer_step(OptimizerState("sgd", 0.1), [("p", p)])
        assert p.grad is None


class TestAdam:
    @pytest.mark.parametrize("magnitude", [1e-3, 1.0, 1e3])
    def test_first_step_magnitude_is_lr(self, magnitude):
        p = _param(np.zeros(5), np.full(5, magnitude))
        optimizer_step(OptimizerState("adam", 1e-2), [("p", p)])
        np.testing.assert_allclose(np.abs(p.data), 1e-2, rtol=1e-4)

    def test_moments_match_parameter_shapes(self):
        p = _param(np.zeros((2, 3)), np.ones((2, 3)))
        state = OptimizerState("adam", 1e-3)
        optimizer_step(state, [("p", p)])
        assert state.adam_m["p"].shape == (2, 3)
        assert state.adam_v["p"].shape == (2, 3)

    def test_step_count_increments(self):
        state = OptimizerState("adam", 1e-3)
        for expected in (1, 2, 3):
            p = _param([0.0], [1.0])
            optimizer_step(state, [("p", p)])
            assert state.step_count == expected


class TestStepErrors:
    def test_missing_gradient(self):
        p = _param([1.0], [1.0])
        p.grad = None
        with pytest.raises(ValueError, match="'p'"):
            optimizer_step(OptimizerState("sgd", 0.1), [("p", p)])

    def test_non_finite_gradient_aborts_whole_step(self):
        good = _param([1.0], [1.0])
        bad = _param([1.0], [np.nan])
        state = OptimizerState("adam", 0.1)
        with pytest.raises(NonFiniteError, match="bad"):
            optimizer_step(state, [("good", good), ("bad", bad)])
        np.testing.assert_array_equal(good.data, [1.0])
        assert state.step_count == 0 and not state.adam_m

    def test_unknown_direction(self):
        with pytest.raises(ValueError):
            optimizer_step(OptimizerState("sgd", 0.1), [], "sideways")

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            OptimizerState("rmsprop", 0.1)
