"""QAHAN: conv -> relu -> conv -> relu -> QAHAM mask -> dropout -> FC, in numpy.

Layers are plain functions returning ``(output, cache)`` with matching
``*_backward(dout, cache)`` functions. They follow the dtype of their
inputs, so the same code trains in float32 and is gradient-checked in
float64.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .attention import apply_mask, attended_energy
from .config import NetworkConfig
from .errors import DimensionError, LabelRangeError, StaleCacheError
from .ingest import gram_matrix, partition_blocks
from .qubo import BinaryMask, QuboProblem, as_bits, to_explicit_qubo
from .solvers import Solver

log = logging.getLogger(__name__)

PARAM_NAMES = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc_w", "fc_b")


# ---------------------------------------------------------------- layers


def conv2d_forward(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    f, c2, kh, kw = w.shape
    if c != c2:
        raise DimensionError(f"conv expects {c2} input channels, got {c}")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ w.reshape(f, -1).T + b
    out = out.reshape(n, oh, ow, f).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (x.shape, cols, w, stride, pad)


def conv2d_backward(dout, cache):
    x_shape, cols, w, stride, pad = cache
    n, c, h, wd = x_shape
    f, _, kh, kw = w.shape
    oh, ow = dout.shape[2], dout.shape[3]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(f, -1)).reshape(n, oh, ow, c, kh, kw)
    dxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=dout.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += dcols[
                :, :, :, :, i, j
            ].transpose(0, 3, 1, 2)
    return dxp[:, :, pad : pad + h, pad : pad + wd], dw, db


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(dout, cache):
    return dout * cache


def dropout_forward(x, rate, rng=None, keep=None):
    """Inverted dropout. Pass ``keep`` to reuse a fixed pattern."""
    if rate == 0:
        return x, None
    if keep is None:
        keep = rng.random(x.shape) >= rate
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    return x * keep * scale, (keep, scale)


def dropout_backward(dout, cache):
    if cache is None:
        return dout
    keep, scale = cache
    return dout * keep * scale


def fc_forward(x, w, b):
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"fc expects {w.shape[0]} inputs, got {x.shape[1]}")
    return x @ w + b, (x, w)


def fc_backward(dout, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits, in float64."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, classes = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"{n} logits rows but {labels.shape} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise LabelRangeError(f"labels must lie in [0, {classes})")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), labels]))
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1
    return loss, grad / n


# ---------------------------------------------------------------- model


def init_params(cfg: NetworkConfig, rng: np.random.Generator, dtype=np.float32) -> dict:
    """Kaiming-uniform conv weights, zero biases, zero FC weights (uniform logits)."""

    def kaiming(shape):
        fan_in = int(np.prod(shape[1:]))
        bound = math.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    c1, c2 = cfg.conv1, cfg.conv2
    return {
        "conv1_w": kaiming((c1.out_channels, cfg.in_channels, c1.kernel, c1.kernel)),
        "conv1_b": np.zeros(c1.out_channels, dtype=dtype),
        "conv2_w": kaiming((c2.out_channels, c1.out_channels, c2.kernel, c2.kernel)),
        "conv2_b": np.zeros(c2.out_channels, dtype=dtype),
        "fc_w": np.zeros((cfg.features, cfg.fc_out), dtype=dtype),
        "fc_b": np.zeros(cfg.fc_out, dtype=dtype),
    }


def expand_mask(mask: BinaryMask, cfg: NetworkConfig) -> np.ndarray:
    """Lift a per-block mask to per-feature 0/1 values over the flattened map."""
    l, m = cfg.grid
    bh, bw = cfg.qaham.block
    bits = as_bits(mask)
    if bits.size != l * m:
        raise DimensionError(f"mask length {bits.size} != grid {l}x{m}")
    if bh == bw == 1:
        return bits
    return np.kron(bits.reshape(l, m), np.ones((bh, bw))).reshape(-1)


class QAHAN:
    """Parameters plus the activation cache of the most recent training pass."""

    def __init__(self, cfg: NetworkConfig, params: dict):
        self.cfg = cfg
        self.params = params
        self._cache = None

    def extract(self, x):
        """Convolutional trunk; returns flattened (channel-major) features."""
        p, cfg = self.params, self.cfg
        expect = (cfg.in_channels, cfg.image_size, cfg.image_size)
        if x.shape[1:] != expect:
            raise DimensionError(f"input layer expects {expect}, got {x.shape[1:]}")
        h1, c1 = conv2d_forward(x, p["conv1_w"], p["conv1_b"], cfg.conv1.stride, cfg.conv1.padding)
        a1, r1 = relu_forward(h1)
        h2, c2 = conv2d_forward(a1, p["conv2_w"], p["conv2_b"], cfg.conv2.stride, cfg.conv2.padding)
        a2, r2 = relu_forward(h2)
        self._trunk = (c1, r1, c2, r2, a2.shape)
        return a2.reshape(a2.shape[0], -1)

    def head(self, feats, mask: BinaryMask, train: bool = False, rng=None, keep=None):
        """Mask -> dropout (train only) -> FC. Caches for backward in train mode."""
        gate = expand_mask(mask, self.cfg)
        if feats.shape[1] != gate.size:
            raise DimensionError(f"qaham layer expects {gate.size} features, got {feats.shape[1]}")
        masked = apply_mask(feats, gate)
        if train:
            dropped, dcache = dropout_forward(masked, self.cfg.dropout_rate, rng, keep)
        else:
            dropped, dcache = masked, None
        logits, fcache = fc_forward(dropped, self.params["fc_w"], self.params["fc_b"])
        self._cache = (self._trunk, gate, dcache, fcache) if train else None
        return logits

    def forward(self, x, mask: BinaryMask, train: bool = False, rng=None, keep=None):
        return self.head(self.extract(x), mask, train, rng, keep)

    def backward(self, dlogits) -> dict:
        if self._cache is None:
            raise StaleCacheError("backward() needs a preceding forward() in train mode")
        (c1, r1, c2, r2, a2_shape), gate, dcache, fcache = self._cache
        self._cache = None
        g = {}
        d, g["fc_w"], g["fc_b"] = fc_backward(dlogits, fcache)
        d = dropout_backward(d, dcache)
        # the mask is a constant gate: gradient passes only where it is 1
        d = apply_mask(d, gate).reshape(a2_shape)
        d = relu_backward(d, r2)
        d, g["conv2_w"], g["conv2_b"] = conv2d_backward(d, c2)
        d = relu_backward(d, r1)
        _, g["conv1_w"], g["conv1_b"] = conv2d_backward(d, c1)
        return g

    def predict(self, x, mask: BinaryMask):
        return softmax(self.forward(x, mask, train=False))


# ---------------------------------------------------------------- adam


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls(
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads[name]
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        step = (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)
        p -= step


# ---------------------------------------------------------------- qaham layer


@dataclass
class SolveRecord:
    epoch: int
    batch: int
    energy: float
    attended_energy: float
    cardinality: int
    solver: str
    seed: int


@dataclass
class QahamLayer:
    """Chooses when to re-solve the mask and builds the QUBO from features.

    ``per_epoch`` solves once, on the first batch of each epoch;
    ``per_batch`` solves on every training batch. Either way the QUBO comes
    from the batch-mean feature map, so one mask gates the whole batch.
    """

    cfg: NetworkConfig
    solver: Solver
    seed: int
    mask: BinaryMask
    first_solved: Optional[BinaryMask] = None
    records: list = field(default_factory=list)
    _solved_epoch: int = field(default=-1, init=False, repr=False)

    def build_problem(self, feats) -> tuple[QuboProblem, np.ndarray]:
        """QUBO over grid blocks of the mean feature map, plus the raw Gram matrix."""
        l, m = self.cfg.grid
        bh, bw = self.cfg.qaham.block
        if feats.shape[1] != l * m * bh * bw:
            raise DimensionError(f"{feats.shape[1]} features do not fill a {l}x{m} grid")
        matrix = feats.astype(np.float64).mean(axis=0).reshape(l * bh, m * bw)
        q = gram_matrix(partition_blocks(matrix, l, m))
        qs = q
        if self.cfg.qaham.normalize_q:
            scale = float(np.max(np.abs(q)))
            if scale > 0:
                qs = q / scale
        qa = self.cfg.qaham
        return QuboProblem(qs, qa.lambda1, qa.lambda2, qa.k), qs

    def solve(self, feats, epoch: int, batch: int) -> BinaryMask:
        problem, q = self.build_problem(feats)
        return self.solve_problem(problem, q, epoch, batch)

    def solve_problem(self, problem: QuboProblem, q, epoch: int, batch: int) -> BinaryMask:
        seed = int(np.random.SeedSequence([self.seed, epoch, batch]).generate_state(1)[0])
        result = self.solver.solve(to_explicit_qubo(problem), seed)
        mask = result.x_opt
        self.records.append(
            SolveRecord(
                epoch,
                batch,
                result.energy,
                attended_energy(q, mask),
                mask.cardinality,
                result.solver_name,
                seed,
            )
        )
        log.debug("epoch %d batch %d solved: energy %.6g, |x| = %d", epoch, batch, result.energy, mask.cardinality)
        if self.first_solved is None:
            self.first_solved = mask
        self.mask = mask
        return mask

    def __call__(self, feats, epoch: int, batch: int):
        """Return (masked features, mask), re-solving per the cadence."""
        cadence = self.cfg.qaham.cadence
        if cadence == "per_batch" or (cadence == "per_epoch" and self._solved_epoch != epoch):
            self.solve(feats, epoch, batch)
            self._solved_epoch = epoch
        return apply_mask(feats, expand_mask(self.mask, self.cfg)), self.mask
