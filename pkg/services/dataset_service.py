"""
Synthetic thermal-like scenes, dataset loading and directory degradation.
"""
import logging
import os
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from degradation.compose import apply_degradation_spec
from storage.images import list_images, read_image, save_image
from storage.manifest import ImagePair, ManifestEntry, load_dataset, read_manifest, write_manifest
from utils.helpers import derive_seed

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.txt'


class DatasetService:
    """Service for building and reading image datasets."""

    @staticmethod
    def synthesize_scene(rng: np.random.Generator, size: int) -> np.ndarray:
        """
        One scene in [0, 1]: cool background gradient, a few warm elliptical
        bodies with soft rims, and low-amplitude smoothed texture.
        """
        yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        ramp = np.cos(angle) * xx + np.sin(angle) * yy
        ramp = (ramp - ramp.min()) / max(float(np.ptp(ramp)), 1e-12)
        low, span = rng.uniform(0.1, 0.3), rng.uniform(0.05, 0.2)
        scene = low + span * ramp

        for _ in range(int(rng.integers(2, 6))):
            cy, cx = rng.uniform(0.15, 0.85, size=2)
            ry, rx = rng.uniform(0.05, 0.25, size=2)
            heat = rng.uniform(0.35, 0.7)
            theta = rng.uniform(0.0, np.pi)
            dy, dx = yy - cy, xx - cx
            u = (dx * np.cos(theta) + dy * np.sin(theta)) / rx
            v = (-dx * np.sin(theta) + dy * np.cos(theta)) / ry
            body = 1.0 / (1.0 + np.exp(8.0 * (np.hypot(u, v) - 1.0)))
            scene = scene + heat * body * (1.0 - scene)

        texture = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=1.5)
        texture /= max(float(np.abs(texture).max()), 1e-12)
        return np.clip(scene + 0.03 * texture, 0.0, 1.0)

    @staticmethod
    def write_synthetic_dataset(out_dir: str, count: int, size: int, seed: int, bit_depth: int = 8) -> str:
        """Write `count` scenes plus a manifest; returns the manifest path."""
        if count < 1:
            raise ValueError(f"count must be positive, got {count}")
        if size < 4 or size % 4:
            raise ValueError(f"size must be a positive multiple of 4, got {size}")
        os.makedirs(out_dir, exist_ok=True)
        entries = []
        for index in range(count):
            rng = np.random.default_rng(derive_seed(seed, 'scene', index))
            path = os.path.join(out_dir, f"scene_{index:04d}.png")
            save_image(DatasetService.synthesize_scene(rng, size), path, bit_depth=bit_depth)
            entries.append(ManifestEntry(path))
        manifest_path = os.path.join(out_dir, MANIFEST_NAME)
        write_manifest(manifest_path, entries, split='synthetic')
        logger.info(f"Synthesized {count} scene(s) of {size}x{size} into {out_dir}")
        return manifest_path

    @staticmethod
    def load_pairs(manifest_path: str) -> Tuple[List[ImagePair], int]:
        return load_dataset(read_manifest(manifest_path))

    @staticmethod
    def degrade_directory(in_dir: str, out_dir: str, spec: str, seed: int) -> List[str]:
        """Apply one degradation spec to every image, seeded per file name."""
        paths = list_images(in_dir)
        if not paths:
            logger.warning(f"No PNG/PGM images found in {in_dir}")
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for path in paths:
            image, depth = read_image(path)
            name = os.path.basename(path)
            degraded = apply_degradation_spec(image, spec, derive_seed(seed, 'degrade', name))
            target = os.path.join(out_dir, name)
            save_image(degraded, target, bit_depth=depth)
            written.append(target)
        logger.info(f"Wrote {len(written)} degraded image(s) ({spec}) into {out_dir}")
        return written
