import math
import os

import numpy as np
import pytest

from networks.enhancer import DualInteractionNet
from services.dataset_service import DatasetService
from services.evaluation_service import EvaluationService
from services.progress_service import EpochSummary, ProgressService
from storage.images import read_image, save_image
from storage.manifest import ImagePair


@pytest.fixture
def enhancer():
    return DualInteractionNet(np.random.default_rng(0), width=4, time_steps=2)


@pytest.fixture
def eval_pairs():
    """Scenes large enough for every metric window."""
    return [
        ImagePair(f"scene_{i}.png", DatasetService.synthesize_scene(np.random.default_rng(100 + i), 64))
        for i in range(2)
    ]


class TestEvaluationService:
    def test_identity_corruption_with_fresh_enhancer(self, enhancer, eval_pairs):
        report = EvaluationService.evaluate(enhancer, eval_pairs, 'identity')
        assert len(report) == 2
        assert report.column('PSNR') == [math.inf, math.inf]
        assert report.mean('SSIM') == pytest.approx(1.0)
        assert report.mean('VIF') == pytest.approx(1.0, abs=1e-6)

    def test_corruption_lowers_input_scores(self, enhancer, eval_pairs):
        report = EvaluationService.evaluate(enhancer, eval_pairs, 'stripe:0.15+lowres:2', seed=3)
        assert all(math.isfinite(v) for v in report.column('input_PSNR'))
        assert report.mean('input_SSIM') < 1.0

    def test_report_does_not_depend_on_order(self, enhancer, eval_pairs):
        forward = EvaluationService.evaluate(enhancer, eval_pairs, 'stripe:0.3', seed=5)
        backward = EvaluationService.evaluate(enhancer, eval_pairs[::-1], 'stripe:0.3', seed=5)
        assert dict(forward.rows) == dict(backward.rows)

    def test_paired_degraded_images(self, enhancer, eval_pairs):
        pairs = [ImagePair(p.name, p.clean, np.clip(p.clean * 0.9, 0, 1)) for p in eval_pairs]
        report = EvaluationService.evaluate(enhancer, pairs, None)
        assert report.degradation == 'paired' and len(report) == 2

    def test_missing_degraded_image(self, enhancer, eval_pairs):
        with pytest.raises(ValueError, match="no degradation spec"):
            EvaluationService.evaluate(enhancer, eval_pairs, None)

    def test_empty_dataset(self, enhancer):
        with pytest.raises(ValueError):
            EvaluationService.evaluate(enhancer, [], 'identity')

    def test_enhance_images_keeps_depth(self, enhancer, tmp_path, rng):
        source = tmp_path / "in"
        source.mkdir()
        image = rng.uniform(0, 1, (8, 8))
        save_image(image, str(source / "deep.png"), bit_depth=16)
        written = EvaluationService.enhance_images(enhancer, [str(source / "deep.png")], str(tmp_path / "out"))
        loaded, depth = read_image(written[0])
        assert depth == 16
        np.testing.assert_allclose(loaded, image, atol=1.0 / 65535)


class TestDatasetService:
    def test_scene_range_and_determinism(self):
        a = DatasetService.synthesize_scene(np.random.default_rng(3), 32)
        b = DatasetService.synthesize_scene(np.random.default_rng(3), 32)
        assert a.shape == (32, 32) and a.min() >= 0.0 and a.max() <= 1.0
        np.testing.assert_array_equal(a, b)
        assert a.std() > 0.01

    def test_synthetic_dataset_loads(self, tmp_path):
        manifest = DatasetService.write_synthetic_dataset(str(tmp_path / "synth"), count=3, size=16, seed=1)
        pairs, depth = DatasetService.load_pairs(manifest)
        assert depth == 8 and [p.name for p in pairs] == [f"scene_{i:04d}.png" for i in range(3)]

    @pytest.mark.parametrize("count, size", [(0, 16), (2, 18)])
    def test_synthetic_dataset_arguments(self, tmp_path, count, size):
        with pytest.raises(ValueError):
            DatasetService.write_synthetic_dataset(str(tmp_path), count=count, size=size, seed=0)

    def test_degrade_directory_is_reproducible(self, tmp_path):
        DatasetService.write_synthetic_dataset(str(tmp_path / "clean"), count=2, size=16, seed=0)
        first = DatasetService.degrade_directory(str(tmp_path / "clean"), str(tmp_path / "a"), 'stripe:0.3', 9)
        second = DatasetService.degrade_directory(str(tmp_path / "clean"), str(tmp_path / "b"), 'stripe:0.3', 9)
        assert [os.path.basename(p) for p in first] == ["scene_0000.png", "scene_0001.png"]
        for a, b in zip(first, second):
            with open(a, 'rb') as fa, open(b, 'rb') as fb:
                assert fa.read() == fb.read()


class TestProgressService:
    def test_epoch_progress(self):
        progress = ProgressService.calculate_epoch_progress(3, 4)
        assert progress == {'epoch': 3, 'total_epochs': 4, 'percentage': 75, 'remaining_epochs': 1}

    def test_progress_bar_marks_warm_start(self):
        assert ProgressService.create_progress_bar(2, 4, warm_epochs=1, length=4) == "[▒█░░]"

    def test_progress_bar_before_adversarial_phase(self):
        assert ProgressService.create_progress_bar(1, 10, warm_epochs=5, length=10) == "[▒░░░░░░░░░]"

    def test_progress_bar_of_empty_schedule(self):
        assert ProgressService.create_progress_bar(0, 0, length=3) == "[███]"

    def test_epoch_message(self):
        summary = EpochSummary(2, 4, 'adversarial', 0.12345, generator_objective=-0.2,
                               mean_weights=np.array([0.1, 0.7, 0.2]))
        message = ProgressService.format_epoch_message(summary)
        assert "epoch 2/4 (50%)" in message
        assert "generator=-0.20000" in message and "top_op=1" in message
