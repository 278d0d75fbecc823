import numpy as np
import pytest

from autodiff import functional as F
from autodiff.resampling import interpolation_matrix
from autodiff.tensor import Tensor, precision
from utils.errors import ShapeError


class TestConv2d:
    def test_sum_of_ones(self):
        out = F.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))))
        assert out.shape == (1, 1, 1, 1)
        assert out.data.item() == 9.0

    def test_identity_kernel_preserves_input(self, rng):
        x = rng.standard_normal((1, 1, 5, 6))
        kernel = np.zeros((1, 1, 3, 3))
        kernel[0, 0, 1, 1] = 1.0
        with precision(np.float64):
            out = F.conv2d(Tensor(x), Tensor(kernel), padding=1)
        np.testing.assert_allclose(out.data, x)

    def test_stride_two_output_extent(self, rng):
        out = F.conv2d(Tensor(rng.standard_normal((2, 3, 8, 8))), Tensor(rng.standard_normal((4, 3, 3, 3))),
                       stride=2, padding=1)
        assert out.shape == (2, 4, 4, 4)

    def test_cross_correlation_matches_direct_sum(self, rng):
        with precision(np.float64):
            x = rng.standard_normal((1, 2, 4, 4))
            w = rng.standard_normal((1, 2, 2, 2))
            out = F.conv2d(Tensor(x), Tensor(w)).data
        expected = np.array([[np.sum(x[0, :, i:i + 2, j:j + 2] * w[0]) for j in range(3)] for i in range(3)])
        np.testing.assert_allclose(out[0, 0], expected)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError, match="channel"):
            F.conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))

    def test_non_positive_extent(self):
        with pytest.raises(ShapeError):
            F.conv2d(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))


class TestResample2:
    def test_down_of_constant_block(self):
        out = F.resample2(Tensor(np.ones((1, 1, 2, 2))), "down")
        np.testing.assert_array_equal(out.data, [[[[1.0]]]])

    def test_up_down_preserves_constant(self):
        x = Tensor(np.full((1, 2, 4, 6), 0.37))
        out = F.resample2(F.resample2(x, "down"), "up")
        np.testing.assert_allclose(out.data, x.data, rtol=1e-5)

    def test_odd_extent_rejected_on_down(self):
        with pytest.raises(ShapeError):
            F.resample2(Tensor(np.ones((1, 1, 3, 4))), "down")

    def test_unknown_direction(self):
        with pytest.raises(ValueError):
            F.resample2(Tensor(np.ones((1, 1, 2, 2))), "sideways")


class TestInterpolationMatrix:
    @pytest.mark.parametrize("method", ["bicubic", "bilinear"])
    def test_rows_sum_to_one(self, method):
        for n_in, n_out in [(8, 4), (4, 8), (16, 4), (5, 7)]:
            m = interpolation_matrix(n_in, n_out, method)
            np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)

    def test_cached_matrix_is_read_only(self):
        m = interpolation_matrix(8, 4)
        assert m is interpolation_matrix(8, 4)
        with pytest.raises(ValueError):
            m[0, 0] = 1.0

    def test_same_size_is_identity(self):
        np.testing.assert_allclose(interpolation_matrix(6, 6, "bicubic"), np.eye(6), atol=1e-12)


class TestDenseOps:
    def test_softmax_uniform(self):
        out = F.dense_ops("softmax", Tensor([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.data, [1 / 3, 1 / 3, 1 / 3], rtol=1e-6)

    def test_reduce_mean(self):
        assert F.dense_ops("reduce_mean", Tensor([2.0, 4.0])).data == pytest.approx(3.0)

    def test_softmax_over_empty_axis(self):
        with pytest.raises(ShapeError):
            F.softmax(Tensor(np.zeros((2, 0))), axis=-1)

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeError):
            F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_concat_channels_off_axis_mismatch(self):
        with pytest.raises(ShapeError):
            F.concat_channels([Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 4, 3)))])

    def test_global_avg_pool(self):
        x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
        np.testing.assert_allclose(F.global_avg_pool(x).data, [[7.5]])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            F.dense_ops("cumsum", Tensor([1.0]))


class TestBatchNorm:
    def test_training_output_is_normalized(self, rng):
        with precision(np.float64):
            x = Tensor(rng.normal(3.0, 2.0, (8, 2, 4, 4)))
            out = F.batch_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)))
        np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.data.std(axis=(0, 2, 3)), 1.0, rtol=1e-3)

    def test_threshold_scale_multiplies_normalized_output(self, rng):
        with precision(np.float64):
            x = Tensor(rng.standard_normal((4, 2, 3, 3)))
            plain = F.batch_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2))).data
            scaled = F.batch_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)), scale=1.5).data
        np.testing.assert_allclose(scaled, 1.5 * plain)

    def test_running_statistics_update(self, rng):
        x = Tensor(rng.normal(2.0, 1.0, (4, 3, 5, 5)))
        mean, var = np.zeros(3, dtype=np.float32), np.ones(3, dtype=np.float32)
        F.batch_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), running_mean=mean, running_var=var, momentum=0.5)
        np.testing.assert_allclose(mean, 0.5 * x.data.mean(axis=(0, 2, 3)), rtol=1e-5)

    def test_frozen_statistics_when_not_tracking(self, rng):
        x = Tensor(rng.normal(2.0, 1.0, (4, 3, 5, 5)))
        mean, var = np.zeros(3, dtype=np.float32), np.ones(3, dtype=np.float32)
        F.batch_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), running_mean=mean, running_var=var,
                     track_stats=False)
        np.testing.assert_array_equal(mean, 0.0)
        np.testing.assert_array_equal(var, 1.0)

    def test_eval_mode_needs_statistics(self):
        with pytest.raises(ValueError):
            F.batch_norm(Tensor(np.ones((2, 1, 2, 2))), Tensor(np.ones(1)), Tensor(np.zeros(1)), training=False)
