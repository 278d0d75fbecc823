"""
Plain-text dataset manifests.

One clean image path per line, an optional degraded path in a second
tab-separated column, `#` comments and an `@split NAME` directive.
Relative paths resolve against the manifest's directory.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from storage.images import read_image
from utils.errors import ConfigError, ImageFormatError, ShapeError

logger = logging.getLogger(__name__)

EXTENT_MULTIPLE = 4


@dataclass
class ManifestEntry:
    clean: str
    degraded: Optional[str] = None

    @property
    def name(self) -> str:
        return os.path.basename(self.clean)


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry] = field(default_factory=list)
    split: str = 'train'

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class ImagePair:
    """A clean target with its optional pre-degraded counterpart, float64 in [0, 1]."""

    name: str
    clean: np.ndarray
    degraded: Optional[np.ndarray] = None


def parse_manifest(text: str, base_dir: str = '.', source: str = '<string>') -> DatasetManifest:
    manifest = DatasetManifest()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].rstrip()
        if not line.strip():
            continue
        if line.lstrip().startswith('@'):
            directive, _, value = line.strip().partition(' ')
            if directive != '@split' or not value.strip():
                raise ConfigError(f"{source}:{lineno}: unknown directive {line.strip()!r}")
            manifest.split = value.strip()
            continue
        columns = [c.strip() for c in line.split('\t') if c.strip()]
        if len(columns) > 2:
            raise ConfigError(f"{source}:{lineno}: expected at most two tab-separated paths")
        paths = [c if os.path.isabs(c) else os.path.normpath(os.path.join(base_dir, c)) for c in columns]
        manifest.entries.append(ManifestEntry(paths[0], paths[1] if len(paths) == 2 else None))
    return manifest


def read_manifest(path: str) -> DatasetManifest:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigError(f"cannot read manifest {path}: {e}") from e
    manifest = parse_manifest(text, os.path.dirname(os.path.abspath(path)), source=path)
    logger.info(f"Read manifest {path}: {len(manifest)} image(s), split {manifest.split!r}")
    return manifest


def write_manifest(path: str, entries: Sequence[ManifestEntry], split: str = 'train') -> None:
    """Write entries with paths relative to the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    lines = [f"@split {split}"]
    for entry in entries:
        columns = [entry.clean] + ([entry.degraded] if entry.degraded else [])
        lines.append('\t'.join(os.path.relpath(os.path.abspath(c), base) for c in columns))
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write('\n'.join(lines) + '\n')
    logger.info(f"Wrote manifest {path} with {len(entries)} entries")


def load_dataset(manifest: DatasetManifest) -> Tuple[List[ImagePair], int]:
    """
    Decode every image of a manifest.

    Returns the pairs and their common bit depth. Mixed depths, extents not
    divisible by 4 and clean/degraded shape mismatches are rejected.
    """
    if not manifest.entries:
        raise ValueError("manifest lists no images")
    pairs: List[ImagePair] = []
    depths = set()
    for entry in manifest.entries:
        clean, depth = read_image(entry.clean)
        depths.add(depth)
        if any(n % EXTENT_MULTIPLE for n in clean.shape):
            raise ShapeError(f"{entry.clean}: extents {clean.shape} must be divisible by {EXTENT_MULTIPLE}")
        degraded = None
        if entry.degraded:
            degraded, depth = read_image(entry.degraded)
            depths.add(depth)
            if degraded.shape != clean.shape:
                raise ShapeError(f"{entry.degraded}: shape {degraded.shape} differs from clean {clean.shape}")
        pairs.append(ImagePair(entry.name, clean, degraded))
    if len(depths) > 1:
        raise ImageFormatError(f"manifest mixes bit depths {sorted(depths)}")
    return pairs, depths.pop()
