"""Solved-mask artifacts: score matrix, feature gating, attended energy, PGM renders."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DimensionError
from .qubo import MaskLike, as_bits, energy


def score_matrix(x: MaskLike) -> np.ndarray:
    """Outer product x x^T as a uint8 matrix."""
    bits = as_bits(x).astype(np.uint8)
    return np.outer(bits, bits)


def apply_mask(features: np.ndarray, x: MaskLike) -> np.ndarray:
    """Zero every feature whose mask bit is 0; works on (n,) or (batch, n)."""
    features = np.asarray(features)
    bits = as_bits(x)
    if features.shape[-1] != bits.size:
        raise DimensionError(f"feature length {features.shape[-1]} != mask length {bits.size}")
    # np.where keeps kept entries bit-identical (no multiply by 1.0, no -0.0)
    return np.where(bits.astype(bool), features, np.zeros((), dtype=features.dtype))


def attended_energy(q: np.ndarray, x_opt: MaskLike) -> float:
    """x^T Q x without penalty terms."""
    return energy(q, x_opt)


def _write_pgm(path, image: np.ndarray) -> None:
    h, w = image.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM written by this module."""
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(raw) and not raw[end : end + 1].isspace():
            end += 1
        if end == pos:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a P5 PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pixels = raw[pos + 1 :]
    if len(pixels) != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)


def render_mask(x: MaskLike, l: int, m: int, path) -> Path:
    """Write the mask as an l x m P5 PGM, selected = 255, masked = 0."""
    bits = as_bits(x)
    if bits.size != l * m:
        raise DimensionError(f"mask length {bits.size} != {l}x{m}")
    _write_pgm(path, bits.reshape(l, m).astype(np.uint8) * 255)
    return Path(path)


def render_score_matrix(x: MaskLike, path) -> Path:
    _write_pgm(path, score_matrix(x) * 255)
    return Path(path)
