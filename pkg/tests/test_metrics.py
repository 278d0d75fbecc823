import math
from collections import Counter

import numpy as np
import pytest
from scipy import ndimage

from metrics.quality import (
    fspecial_gaussian,
    metric_en,
    metric_mi,
    metric_psnr,
    metric_qabf,
    metric_scd,
    metric_sd,
    metric_ssim,
    metric_vif,
    quantize8,
)
from utils.errors import ShapeError


def _levels(img):
    return [int(math.floor(v * 255 + 0.5)) for v in np.ravel(img)]


def _entropy(items):
    counts = Counter(items)
    n = sum(counts.values())
    return -sum(c / n * math.log2(c / n) for c in counts.values())


class TestHistogramMetrics:
    def test_entropy_by_counting(self, rng):
        img = rng.integers(0, 4, (4, 4)) / 3.0
        assert metric_en(img) == pytest.approx(_entropy(_levels(img)))

    def test_entropy_of_constant_is_zero(self):
        assert metric_en(np.full((4, 4), 0.3)) == 0.0

    def test_entropy_of_two_equal_halves(self):
        img = np.zeros((4, 4))
        img[:, 2:] = 1.0
        assert metric_en(img) == pytest.approx(1.0)

    def test_mutual_information_by_counting(self, rng):
        a = rng.integers(0, 3, (8, 8)) / 2.0
        b = rng.integers(0, 3, (8, 8)) / 2.0
        la, lb = _levels(a), _levels(b)
        expected = _entropy(la) + _entropy(lb) - _entropy(list(zip(la, lb)))
        assert metric_mi(a, b) == pytest.approx(expected, abs=1e-12)

    def test_mutual_information_with_itself_is_entropy(self, rng):
        img = rng.uniform(0, 1, (8, 8))
        assert metric_mi(img, img) == pytest.approx(metric_en(img))

    def test_mutual_information_is_symmetric(self, rng):
        a = rng.uniform(0, 1, (8, 8))
        b = np.clip(a + 0.1 * rng.standard_normal((8, 8)), 0, 1)
        assert abs(metric_mi(a, b) - metric_mi(b, a)) <= 1e-10

    def test_quantization_rounds_half_up(self):
        assert quantize8(np.array([0.5, 0.0, 1.0, -0.1, 1.2])).tolist() == [128, 0, 255, 0, 255]


class TestPixelMetrics:
    def test_standard_deviation(self):
        assert metric_sd(np.array([[0.0, 1.0], [0.0, 1.0]])) == pytest.approx(0.5)

    @pytest.mark.parametrize("size", [4, 8])
    def test_standard_deviation_by_two_passes(self, rng, size):
        values = list(np.ravel(rng.uniform(0, 1, (size, size))))
        mean = sum(values) / len(values)
        variance = sum((v - mean) ** 2 for v in values) / len(values)
        img = np.array(values).reshape(size, size)
        assert abs(metric_sd(img) - math.sqrt(variance)) <= 1e-9

    def test_psnr_by_hand(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 0.1)
        assert metric_psnr(a, b) == pytest.approx(20.0)

    def test_psnr_of_identical_images_is_inf(self, rng):
        img = rng.uniform(0, 1, (4, 4))
        assert metric_psnr(img, img) == math.inf

    def test_scd_matches_correlation_of_differences(self, rng):
        f, a, b = (rng.uniform(0, 1, (8, 8)) for _ in range(3))
        expected = np.corrcoef((f - b).ravel(), a.ravel())[0, 1] + np.corrcoef((f - a).ravel(), b.ravel())[0, 1]
        assert metric_scd(f, a, b) == pytest.approx(expected)

    def test_scd_flat_source_contributes_nothing(self, rng):
        a = rng.uniform(0, 1, (8, 8))
        b = np.full((8, 8), 0.5)
        # f - b is a itself; f - a is constant and correlates with nothing
        assert metric_scd(a + 0.5, a, b) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            metric_psnr(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_colour_input_rejected(self):
        with pytest.raises(ShapeError):
            metric_sd(np.zeros((4, 4, 3)))


class TestStructuralMetrics:
    def test_ssim_of_identical_images(self, rng):
        img = rng.uniform(0, 1, (16, 16))
        assert metric_ssim(img, img) == pytest.approx(1.0)

    def test_ssim_decreases_with_noise(self, rng):
        img = rng.uniform(0, 1, (16, 16))
        noise = rng.standard_normal(img.shape)
        scores = [metric_ssim(img, img + s * noise) for s in (0.01, 0.05, 0.2)]
        assert scores == sorted(scores, reverse=True)

    def test_gaussian_window_is_normalized(self):
        win = fspecial_gaussian(11, 1.5)
        assert win.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(win, win.T)

    def test_vif_of_identical_images_is_one(self, rng):
        img = ndimage.gaussian_filter(rng.uniform(0, 1, (64, 64)), 1.0)
        assert metric_vif(img, img) == pytest.approx(1.0, abs=1e-6)

    def test_vif_decreases_with_noise(self, rng):
        img = ndimage.gaussian_filter(rng.uniform(0, 1, (64, 64)), 1.0)
        noise = rng.standard_normal(img.shape)
        scores = [metric_vif(img, img + s * noise) for s in (0.01, 0.05, 0.2)]
        assert scores == sorted(scores, reverse=True)
        assert scores[0] < 1.0

    def test_vif_needs_room_for_every_scale(self, rng):
        with pytest.raises(ValueError):
            metric_vif(rng.uniform(0, 1, (16, 16)), rng.uniform(0, 1, (16, 16)))

    def test_qabf_prefers_the_sharp_image(self, rng):
        img = ndimage.gaussian_filter(rng.uniform(0, 1, (32, 32)), 1.0)
        blurred = ndimage.gaussian_filter(img, 2.0)
        assert metric_qabf(img, img) > metric_qabf(blurred, img)

    def test_qabf_of_flat_source_is_zero(self, rng):
        assert metric_qabf(rng.uniform(0, 1, (8, 8)), np.full((8, 8), 0.4)) == 0.0

    def test_qabf_ignores_a_common_offset(self, rng):
        fused = ndimage.gaussian_filter(rng.uniform(0.1, 0.8, (16, 16)), 1.0)
        src = ndimage.gaussian_filter(rng.uniform(0.1, 0.8, (16, 16)), 1.0)
        assert metric_qabf(fused + 0.1, src + 0.1) == pytest.approx(metric_qabf(fused, src), abs=1e-9)

    def test_vif_against_flat_distortion_is_zero(self, rng):
        img = ndimage.gaussian_filter(rng.uniform(0, 1, (64, 64)), 1.0)
        assert metric_vif(img, np.full((64, 64), 0.4)) == pytest.approx(0.0, abs=1e-6)
