"""Versioned binary checkpoint.

Layout (little-endian)::

    b"QAHANCKP"  u32 version
    u32 len, config JSON (utf-8)
    u32 epoch, u32 adam step
    u32 tensor count, then per tensor:
        u16 len, name (ascii), u32 ndim, u32 dims[ndim], float32 data
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import DataFormatError
from .network import PARAM_NAMES, QAHAN, AdamState, QahamLayer
from .qubo import BinaryMask
from .training import TrainedModel, solver_seed

MAGIC = b"QAHANCKP"
VERSION = 1


def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<H", len(name)) + name.encode("ascii")
    head += struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    return head + arr.tobytes()


def save_checkpoint(path, state: TrainedModel, config: RunConfig) -> Path:
    tensors = dict(state.model.params)
    for key in state.model.params:
        tensors[f"adam_m.{key}"] = state.adam.m[key]
        tensors[f"adam_v.{key}"] = state.adam.v[key]
    tensors["mask.current"] = state.qaham.mask.bits
    if state.qaham.first_solved is not None:
        tensors["mask.first"] = state.qaham.first_solved.bits
    cfg = config.to_json().encode("utf-8")
    out = bytearray(MAGIC + struct.pack("<I", VERSION))
    out += struct.pack("<I", len(cfg)) + cfg
    out += struct.pack("<III", state.epoch, state.adam.step, len(tensors))
    for name in sorted(tensors):
        out += _pack_tensor(name, tensors[name])
    path = Path(path)
    path.write_bytes(bytes(out))
    return path


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise DataFormatError(f"{self.path}: checkpoint truncated")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path) -> tuple[dict, int, int, dict]:
    """Return (config dict, epoch, adam step, tensors)."""
    raw = Path(path).read_bytes()
    r = _Reader(raw, path)
    if r.take(8) != MAGIC:
        raise DataFormatError(f"{path}: not a qahan checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
    (clen,) = r.unpack("<I")
    config = json.loads(r.take(clen).decode("utf-8"))
    epoch, step, count = r.unpack("<III")
    tensors = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("ascii")
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape).copy()
    return config, epoch, step, tensors


def load_checkpoint(path, config: RunConfig, solver) -> TrainedModel:
    """Rebuild a trainable model; ``config`` supplies architecture and seed."""
    _, epoch, step, tensors = read_checkpoint(path)
    cfg = config.network
    names = PARAM_NAMES
    try:
        params = {k: tensors[k].astype(np.float32) for k in names}
        adam = AdamState(
            {k: tensors[f"adam_m.{k}"] for k in names},
            {k: tensors[f"adam_v.{k}"] for k in names},
            step,
        )
        mask = BinaryMask(tensors["mask.current"].astype(np.uint8), source="checkpoint")
    except KeyError as exc:
        raise DataFormatError(f"{path}: checkpoint lacks tensor {exc}") from None
    first = tensors.get("mask.first")
    layer = QahamLayer(
        cfg,
        solver,
        seed=solver_seed(config.seed),
        mask=mask,
        first_solved=None if first is None else BinaryMask(first.astype(np.uint8), "checkpoint"),
    )
    return TrainedModel(QAHAN(cfg, params), layer, adam, epoch)
