"""Epoch / mini-batch loop, evaluation and training history."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import astuple, dataclass, field
from typing import Optional

import numpy as np

from .config import NetworkConfig
from .errors import ConfigError
from .ingest import ImageBatch
from .network import QAHAN, AdamState, QahamLayer, adam_step, init_params, loss_and_grad
from .qubo import BinaryMask
from .solvers import Solver

log = logging.getLogger(__name__)

HISTORY_HEADER = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc")

# independent RNG streams derived from the master seed
STREAM_INIT, STREAM_SHUFFLE, STREAM_DROPOUT, STREAM_MASK, STREAM_SOLVER = range(5)


def stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def solver_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, STREAM_SOLVER]).generate_state(1)[0])


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float


@dataclass
class TrainingHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HISTORY_HEADER)
        for r in self.records:
            writer.writerow([r.epoch, *(repr(float(v)) for v in astuple(r)[1:])])
        return buf.getvalue()


@dataclass
class TrainedModel:
    model: QAHAN
    qaham: QahamLayer
    adam: AdamState
    epoch: int = 0

    @property
    def mask(self) -> BinaryMask:
        return self.qaham.mask


def evaluate(model: QAHAN, data: ImageBatch, mask: BinaryMask, batch_size: int = 256):
    """Mean loss and accuracy in eval mode (no dropout, no re-solve)."""
    total_loss, correct = 0.0, 0
    for start in range(0, len(data), batch_size):
        x = data.data[start : start + batch_size]
        y = data.labels[start : start + batch_size]
        logits = model.forward(x, mask, train=False)
        loss, _ = loss_and_grad(logits, y)
        total_loss += loss * len(y)
        correct += int((logits.argmax(axis=1) == y).sum())
    return total_loss / len(data), correct / len(data)


def build(cfg: NetworkConfig, solver: Solver, seed: int) -> TrainedModel:
    params = init_params(cfg, stream(seed, STREAM_INIT))
    initial = BinaryMask.random(cfg.n_vars, stream(seed, STREAM_MASK), source="initial")
    qaham = QahamLayer(cfg, solver, seed=solver_seed(seed), mask=initial)
    return TrainedModel(QAHAN(cfg, params), qaham, AdamState.zeros_like(params))


def train(
    cfg: NetworkConfig,
    train_set: ImageBatch,
    test_set: ImageBatch,
    solver: Solver,
    seed: int = 0,
    state: Optional[TrainedModel] = None,
) -> tuple[TrainedModel, TrainingHistory]:
    """Run ``cfg.epochs`` epochs; fully determined by ``seed``."""
    expect = (cfg.in_channels, cfg.image_size, cfg.image_size)
    for name, ds in (("train", train_set), ("test", test_set)):
        if ds.data.shape[1:] != expect:
            raise ConfigError(f"network expects {expect} inputs, {name} set has {ds.data.shape[1:]}")
        if len(ds) == 0:
            raise ConfigError(f"{name} set is empty")
    state = state or build(cfg, solver, seed)
    history = TrainingHistory()
    shuffle_rng = stream(seed, STREAM_SHUFFLE)
    dropout_rng = stream(seed, STREAM_DROPOUT)
    model = state.model
    n = len(train_set)
    for _ in range(cfg.epochs):
        epoch = state.epoch + 1
        order = shuffle_rng.permutation(n)
        total_loss, correct = 0.0, 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            x, y = train_set.data[idx], train_set.labels[idx]
            feats = model.extract(x)
            _, mask = state.qaham(feats, epoch, b)
            logits = model.head(feats, mask, train=True, rng=dropout_rng)
            loss, dlogits = loss_and_grad(logits, y)
            grads = model.backward(dlogits.astype(logits.dtype))
            adam_step(model.params, grads, state.adam, cfg.lr)
            total_loss += loss * len(idx)
            correct += int((logits.argmax(axis=1) == y).sum())
        state.epoch = epoch
        test_loss, test_acc = evaluate(model, test_set, state.mask)
        rec = EpochRecord(epoch, total_loss / n, correct / n, test_loss, test_acc)
        history.records.append(rec)
        log.info(
            "epoch %d: train loss %.4f acc %.4f | test loss %.4f acc %.4f | |x| = %d",
            epoch, rec.train_loss, rec.train_acc, rec.test_loss, rec.test_acc, state.mask.cardinality,
        )
    return state, history
