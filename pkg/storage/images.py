"""
Grayscale PNG/PGM reading and writing through Pillow.
"""
import logging
import os
from typing import List, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from utils.errors import ImageFormatError

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = ('.png', '.pgm')
SUPPORTED_FORMATS = ('PNG', 'PPM')
SIXTEEN_BIT_MODES = ('I', 'I;16', 'I;16B', 'I;16L')


def read_image(path: str) -> Tuple[np.ndarray, int]:
    """Decode a grayscale image to float64 in [0, 1] and report its bit depth."""
    try:
        with Image.open(path) as img:
            img.load()
            fmt, mode = img.format, img.mode
            if fmt not in SUPPORTED_FORMATS:
                raise ImageFormatError(f"{path}: unsupported format {fmt}; expected PNG or PGM")
            if mode == '1':
                img = img.convert('L')
                mode = 'L'
            if mode == 'L':
                return np.asarray(img, dtype=np.float64) / 255.0, 8
            if mode in SIXTEEN_BIT_MODES:
                return np.asarray(img, dtype=np.float64) / 65535.0, 16
    except (OSError, UnidentifiedImageError) as e:
        raise ImageFormatError(f"cannot read image {path}: {e}") from e
    raise ImageFormatError(f"{path}: colour or unsupported mode {mode!r}; grayscale images only")


def save_image(img: np.ndarray, path: str, bit_depth: int = 8) -> None:
    """
    Quantize with round-half-up and write PNG or PGM by extension.

    Values outside [0, 1] are clamped first and a warning is logged.
    """
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    ext = os.path.splitext(path)[1].lower()
    if ext not in IMAGE_EXTENSIONS:
        raise ImageFormatError(f"{path}: extension must be one of {IMAGE_EXTENSIONS}")
    data = np.asarray(img, dtype=np.float64)
    if data.ndim != 2:
        raise ImageFormatError(f"expected an (H, W) image, got shape {data.shape}")
    outside = int(np.count_nonzero((data < 0.0) | (data > 1.0)))
    if outside:
        logger.warning(f"Clamping {outside} out-of-range pixel(s) before writing {path}")
        data = np.clip(data, 0.0, 1.0)

    peak = 255 if bit_depth == 8 else 65535
    levels = np.floor(data * peak + 0.5)
    out = Image.fromarray(levels.astype(np.uint8 if bit_depth == 8 else '<u2'))
    if bit_depth == 16 and ext == '.pgm':
        # PPM writer takes 16-bit samples from mode I
        out = out.convert('I')
    try:
        out.save(path, format='PNG' if ext == '.png' else 'PPM')
    except OSError as e:
        raise ImageFormatError(f"cannot write image {path}: {e}") from e


def list_images(directory: str) -> List[str]:
    """PNG/PGM files in a directory, sorted by name."""
    if not os.path.isdir(directory):
        raise ImageFormatError(f"not a directory: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(IMAGE_EXTENSIONS))
    return [os.path.join(directory, n) for n in names]
