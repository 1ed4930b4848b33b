"""Dataset readers, normalization, noise, block partition and Gram matrix."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadMagicError,
    CountMismatchError,
    DimensionError,
    EmptyDatasetError,
    DataFormatError,
    LabelRangeError,
    TruncatedFileError,
)

IDX_IMAGES_MAGIC = 0x00000803  # 2051
IDX_LABELS_MAGIC = 0x00000801  # 2049
CIFAR_RECORD = 1 + 3 * 32 * 32
NUM_CLASSES = 10


@dataclass(frozen=True)
class ImageBatch:
    data: np.ndarray  # (N, C, H, W)
    labels: np.ndarray  # (N,) int64

    def __post_init__(self):
        if self.data.ndim != 4:
            raise DimensionError(f"image data must be 4-D (N, C, H, W), got {self.data.shape}")
        if self.labels.shape != (self.data.shape[0],):
            raise CountMismatchError(
                f"{self.data.shape[0]} images but {self.labels.shape[0]} labels"
            )

    def __len__(self):
        return self.data.shape[0]

    def subset(self, count: int) -> "ImageBatch":
        """First ``count`` samples in file order."""
        if not 0 < count <= len(self):
            raise ValueError(f"subset size {count} outside [1, {len(self)}]")
        return ImageBatch(self.data[:count], self.labels[:count])


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _read_idx(path, magic: int, header_ints: int) -> tuple[tuple[int, ...], bytes]:
    raw = _read_bytes(path)
    hlen = 4 * (1 + header_ints)
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes, shorter than the IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: magic {found:#010x}, expected {magic:#010x}")
    if len(raw) < hlen:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes, shorter than the IDX header")
    dims = struct.unpack(f">{header_ints}I", raw[4:hlen])
    body = raw[hlen:]
    if len(body) < int(np.prod(dims)):
        raise TruncatedFileError(f"{path}: payload has {len(body)} bytes, header promises {np.prod(dims)}")
    return tuple(dims), body


def load_mnist(image_path, label_path) -> ImageBatch:
    """Read an IDX image/label pair (optionally gzipped) as raw 0..255 floats."""
    (n, rows, cols), body = _read_idx(image_path, IDX_IMAGES_MAGIC, 3)
    (n_labels,), lbody = _read_idx(label_path, IDX_LABELS_MAGIC, 1)
    if n != n_labels:
        raise CountMismatchError(f"{n} images but {n_labels} labels")
    images = np.frombuffer(body, dtype=np.uint8, count=n * rows * cols)
    labels = np.frombuffer(lbody, dtype=np.uint8, count=n).astype(np.int64)
    if labels.size and labels.max() >= NUM_CLASSES:
        raise LabelRangeError(f"label {labels.max()} outside 0..9")
    return ImageBatch(images.reshape(n, 1, rows, cols).astype(np.float32), labels)


def write_mnist(image_path, label_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images (N, H, W) and labels (N,) as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(image_path).write_bytes(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols) + images.tobytes())
    Path(label_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, n) + labels.tobytes())


def load_cifar10(batch_paths: Sequence) -> ImageBatch:
    """Concatenate CIFAR-10 binary batches into one (N, 3, 32, 32) batch."""
    if not batch_paths:
        raise EmptyDatasetError("no CIFAR-10 batch files given")
    records = []
    for path in batch_paths:
        raw = _read_bytes(path)
        if len(raw) == 0 or len(raw) % CIFAR_RECORD:
            raise DataFormatError(f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD}")
        records.append(np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD))
    rec = np.concatenate(records)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() >= NUM_CLASSES:
        raise LabelRangeError(f"label {labels.max()} outside 0..9")
    data = rec[:, 1:].reshape(-1, 3, 32, 32).astype(np.float32)
    return ImageBatch(data, labels)


def write_cifar10(path, images: np.ndarray, labels: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8).reshape(len(labels), -1)
    rec = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], images], axis=1)
    Path(path).write_bytes(rec.tobytes())


def normalize(raw: ImageBatch) -> ImageBatch:
    """Map byte range [0, 255] affinely onto [-1, 1]."""
    return ImageBatch((raw.data / 127.5 - 1.0).astype(raw.data.dtype), raw.labels)


def add_noise(batch: ImageBatch, intensity: float, seed: int) -> ImageBatch:
    """Add N(0, intensity**2) noise to every element and clamp to [-1, 1]."""
    if intensity < 0:
        raise ValueError("noise intensity must be non-negative")
    if intensity == 0:
        return batch
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, intensity, size=batch.data.shape)
    data = np.clip(batch.data + noise, -1.0, 1.0).astype(batch.data.dtype)
    return ImageBatch(data, batch.labels)


@dataclass(frozen=True)
class BlockGrid:
    """l x m blocks of a 2-D matrix, flattened row-major, one row per block."""

    l: int
    m: int
    blocks: np.ndarray  # (l*m, block_h*block_w)
    source_shape: tuple

    @property
    def block_shape(self) -> tuple:
        h, w = self.source_shape
        return h // self.l, w // self.m


def partition_blocks(matrix: np.ndarray, l: int, m: int) -> BlockGrid:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {matrix.shape}")
    h, w = matrix.shape
    if l < 1 or m < 1 or h % l or w % m:
        raise DimensionError(f"{h}x{w} matrix is not divisible into {l}x{m} blocks")
    bh, bw = h // l, w // m
    blocks = matrix.reshape(l, bh, m, bw).transpose(0, 2, 1, 3).reshape(l * m, bh * bw)
    return BlockGrid(l, m, blocks, (h, w))


def reassemble_blocks(grid: BlockGrid) -> np.ndarray:
    bh, bw = grid.block_shape
    h, w = grid.source_shape
    return grid.blocks.reshape(grid.l, grid.m, bh, bw).transpose(0, 2, 1, 3).reshape(h, w)


def gram_matrix(grid: BlockGrid) -> np.ndarray:
    """Q[a, b] = <B_a, B_b>; symmetric PSD, computed in float64."""
    if grid.blocks.size == 0:
        raise DimensionError("empty block grid")
    b = grid.blocks.astype(np.float64)
    q = b @ b.T
    return 0.5 * (q + q.T)
