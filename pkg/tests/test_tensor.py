import numpy as np
import pytest

from autodiff import functional as F
from autodiff.tensor import Graph, Tensor, backward, no_grad, precision
from utils.errors import GraphError, ShapeError


class TestTensor:
    def test_default_dtype_is_float32(self):
        assert Tensor([1.0, 2.0]).data.dtype == np.float32

    def test_precision_context_restores_dtype(self):
        with precision(np.float64):
            assert Tensor([1.0]).data.dtype == np.float64
        assert Tensor([1.0]).data.dtype == np.float32

    def test_operator_sugar_matches_functional(self):
        a = Tensor([1.0, 2.0])
        b = Tensor([3.0, 4.0])
        np.testing.assert_array_equal((a + b).data, F.add(a, b).data)
        np.testing.assert_array_equal((a * 2.0).data, [2.0, 4.0])
        np.testing.assert_array_equal((-a).data, [-1.0, -2.0])


class TestElementwise:
    def test_add(self):
        np.testing.assert_array_equal(F.elementwise("add", Tensor([1, 2]), Tensor([3, 4])).data, [4, 6])

    def test_sigmoid_at_zero(self):
        assert F.elementwise("sigmoid", Tensor([0.0])).data[0] == pytest.approx(0.5)

    def test_mul_gradient(self):
        with precision(np.float64):
            a = Tensor([2.0], requires_grad=True)
            b = Tensor([3.0], requires_grad=True)
        backward(F.reduce_sum(F.mul(a, b)))
        np.testing.assert_allclose(a.grad, [3.0])
        np.testing.assert_allclose(b.grad, [2.0])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
            F.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_broadcast_gradient_is_summed(self):
        a = Tensor(np.ones((2, 3)), requires_grad=True)
        b = Tensor(np.ones((1, 3)), requires_grad=True)
        backward(F.reduce_sum(F.add(a, b)))
        np.testing.assert_array_equal(b.grad, [[2.0, 2.0, 2.0]])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            F.elementwise("tanh", Tensor([0.0]))

    def test_outputs_finite_on_finite_inputs(self, rng):
        x = Tensor(rng.normal(0, 50, (4, 4)))
        for kind in ("sigmoid", "relu", "leaky_relu", "abs"):
            assert np.all(np.isfinite(F.elementwise(kind, x).data))


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.arange(4.0), requires_grad=True)
        backward(F.reduce_sum(x))
        np.testing.assert_array_equal(x.grad, np.ones(4))

    def test_stationary_point_has_zero_gradient(self):
        x = Tensor([0.3, -1.2, 2.0], requires_grad=True)
        y = Tensor([0.3, -1.2, 2.0])
        diff = F.sub(x, y)
        backward(F.reduce_mean(F.mul(diff, diff)))
        np.testing.assert_array_equal(x.grad, np.zeros(3))

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(GraphError):
            backward(F.scale(x, 2.0))

    def test_second_backward_needs_new_forward(self):
        x = Tensor(np.ones(3), requires_grad=True)
        loss = F.reduce_sum(F.mul(x, x))
        backward(loss)
        with pytest.raises(GraphError):
            backward(loss)

    def test_loss_without_grad_leaves(self):
        with pytest.raises(GraphError):
            backward(F.reduce_sum(Tensor(np.ones(3))))

    def test_shared_subexpression_accumulates(self):
        x = Tensor([2.0], requires_grad=True)
        y = F.mul(x, x)
        backward(F.reduce_sum(F.add(y, y)))
        np.testing.assert_allclose(x.grad, [8.0])

    def test_gradient_is_linear_in_the_loss(self, rng):
        start = rng.standard_normal(6)
        weight = rng.standard_normal(6)

        def grad_of(a, b):
            with precision(np.float64):
                x = Tensor(start.copy(), requires_grad=True)
            loss_1 = F.reduce_sum(F.sigmoid(F.mul(x, weight)))
            loss_2 = F.reduce_mean(F.mul(x, x))
            backward(F.add(F.scale(loss_1, a), F.scale(loss_2, b)))
            return x.grad

        combined = grad_of(1.7, -0.4)
        np.testing.assert_allclose(combined, 1.7 * grad_of(1.0, 0.0) - 0.4 * grad_of(0.0, 1.0), rtol=0, atol=1e-10)

    def test_no_grad_records_nothing(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = F.mul(x, x)
        assert not y.requires_grad and y.creator is None

    def test_graph_order_puts_inputs_first(self):
        x = Tensor(np.ones(2), requires_grad=True)
        h = F.mul(x, 3.0)
        out = F.reduce_sum(F.add(h, x))
        nodes = Graph.trace(out).nodes
        position = {n.node_id: i for i, n in enumerate(nodes)}
        assert position[x.node_id] < position[h.node_id] < position[out.node_id]
        assert len({n.node_id for n in nodes}) == len(nodes)
