"""
Shared fixtures: seeded generators, small images and a fast training config.
"""
import numpy as np
import pytest

from config import TrainConfig
from degradation.bank import SeverityBank
from services.dataset_service import DatasetService
from storage.manifest import ImagePair


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scenes():
    """Four synthetic 16x16 scenes as training pairs."""
    return [
        ImagePair(f"scene_{i}.png", DatasetService.synthesize_scene(np.random.default_rng(i), 16))
        for i in range(4)
    ]


@pytest.fixture
def small_cfg():
    """Tiny networks and a short schedule; runs in seconds."""
    return TrainConfig(
        gamma_e=1e-3,
        gamma_g=2e-4,
        warm_epochs=1,
        total_epochs=2,
        batch_size=2,
        steps=1,
        seed=7,
        bank=SeverityBank(stripe=(0.1, 0.3), lowres=(2,), contrast=((0.5, 1.0),)),
        width=4,
        time_steps=2,
    )
