"""
Binary checkpoint format.

Layout (all integers little-endian):
    b"DEALCKPT" | u16 version | u32 header length | JSON header (utf-8)
    | u32 tensor count | per tensor: u16 name length, name, u8 ndim,
      u32 extent per axis, float32 values
"""
import json
import logging
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from utils.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"DEALCKPT"
VERSION = 1
FLOAT = np.dtype('<f4')


@dataclass
class Checkpoint:
    tensors: Dict[str, np.ndarray] = field(default_factory=OrderedDict)
    seed: int = 0
    iteration: int = 0
    epoch: int = 0
    config_text: str = ""
    optimizers: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    def section(self, prefix: str) -> Dict[str, np.ndarray]:
        """Tensors under `prefix/`, with the prefix stripped."""
        head = prefix.rstrip('/') + '/'
        return OrderedDict((k[len(head):], v) for k, v in self.tensors.items() if k.startswith(head))


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    header = json.dumps({
        'seed': ckpt.seed,
        'iteration': ckpt.iteration,
        'epoch': ckpt.epoch,
        'config': ckpt.config_text,
        'optimizers': ckpt.optimizers,
        'extra': ckpt.extra,
    }, sort_keys=True).encode('utf-8')

    chunks = [MAGIC, struct.pack('<HI', VERSION, len(header)), header, struct.pack('<I', len(ckpt.tensors))]
    for name, array in ckpt.tensors.items():
        encoded = name.encode('utf-8')
        values = np.array(array, dtype=FLOAT, order='C')
        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<B', values.ndim))
        chunks.append(struct.pack(f'<{values.ndim}I', *values.shape))
        chunks.append(values.tobytes())

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = path + '.tmp'
    with open(tmp, 'wb') as handle:
        handle.write(b''.join(chunks))
    os.replace(tmp, path)
    logger.info(f"Saved checkpoint {path} (epoch {ckpt.epoch}, iteration {ckpt.iteration})")


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, 'rb') as handle:
            data = handle.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    reader = _Reader(data, path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, header_len = reader.unpack('<HI')
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version} is not supported (expected {VERSION})")
    try:
        header = json.loads(reader.take(header_len).decode('utf-8'))
    except ValueError as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e

    tensors: Dict[str, np.ndarray] = OrderedDict()
    (count,) = reader.unpack('<I')
    for _ in range(count):
        (name_len,) = reader.unpack('<H')
        name = reader.take(name_len).decode('utf-8')
        (ndim,) = reader.unpack('<B')
        shape = reader.unpack(f'<{ndim}I') if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        raw = reader.take(size * FLOAT.itemsize)
        tensors[name] = np.frombuffer(raw, dtype=FLOAT).reshape(shape).astype(np.float32)
    if reader.pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - reader.pos} trailing byte(s)")

    return Checkpoint(
        tensors=tensors,
        seed=header.get('seed', 0),
        iteration=header.get('iteration', 0),
        epoch=header.get('epoch', 0),
        config_text=header.get('config', ''),
        optimizers=header.get('optimizers', {}),
        extra=header.get('extra', {}),
    )
