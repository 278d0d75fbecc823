"""
Helper utilities for seed derivation, finiteness checks and batching.
"""
import logging
import zlib
from typing import Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from utils.errors import NonFiniteError

logger = logging.getLogger(__name__)

SeedKey = Union[int, str]


def derive_seed(base: int, *keys: SeedKey) -> int:
    """
    Derive a child seed from a run seed and a path of keys.

    Strings are folded with CRC32 so the result does not depend on the
    interpreter's hash randomization.
    """
    words = [int(base) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            words.append(zlib.crc32(key.encode("utf-8")))
        else:
            words.append(int(key) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint32)[0])


def check_finite(values: np.ndarray, what: str) -> None:
    """Raise NonFiniteError naming `what` if any entry is NaN or infinite."""
    if not np.all(np.isfinite(values)):
        bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
        raise NonFiniteError(f"{what} has {bad} non-finite value(s)")


def global_norm(arrays: Iterable[np.ndarray]) -> float:
    """L2 norm over a collection of arrays, accumulated in float64."""
    total = 0.0
    for arr in arrays:
        total += float(np.sum(np.square(arr, dtype=np.float64)))
    return float(np.sqrt(total))


def iterate_batches(indices: Sequence[int], batch_size: int) -> Iterator[List[int]]:
    """Yield consecutive index groups of at most `batch_size` items."""
    for start in range(0, len(indices), batch_size):
        yield list(indices[start:start + batch_size])


def split_values(text: str) -> List[str]:
    """Split a comma-separated config value, dropping blanks."""
    return [part.strip() for part in text.split(",") if part.strip()]


def summarize(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and population standard deviation, propagating infinities."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    if np.any(np.isinf(arr)):
        finite = arr[np.isfinite(arr)]
        spread = float(np.std(finite)) if finite.size else 0.0
        return float(np.mean(arr)), spread
    return float(np.mean(arr)), float(np.std(arr))
