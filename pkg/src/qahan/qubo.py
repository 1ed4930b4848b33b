"""QAHAM objective: Gram energy plus cardinality and adhesion penalties.

The objective over a binary mask ``x`` is::

    x^T Q x + lambda1 * (sum(x) - k)**2 + lambda2 * sum_a x[a] * x[a+1]

:func:`to_explicit_qubo` folds both penalties into a single symmetric
matrix plus a constant offset so that any plain QUBO sampler can minimize it.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataFormatError, DimensionError

__all__ = [
    "BinaryMask",
    "QuboProblem",
    "ExplicitQubo",
    "as_bits",
    "energy",
    "cardinality_penalty",
    "adhesion_penalty",
    "qaham_objective",
    "to_explicit_qubo",
]


@dataclass(frozen=True)
class BinaryMask:
    """A 0/1 decision vector together with the name of whatever produced it."""

    bits: np.ndarray
    source: str = "unknown"

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size == 0:
            raise DimensionError(f"mask must be a non-empty 1-D vector, got shape {bits.shape}")
        if not np.all((bits == 0) | (bits == 1)):
            raise ValueError("mask entries must be exactly 0 or 1")
        bits = bits.astype(np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return int(self.bits.size)

    @property
    def cardinality(self) -> int:
        return int(self.bits.sum())

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, source: str = "random") -> "BinaryMask":
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8), source)


MaskLike = Union[BinaryMask, np.ndarray, list, tuple]


def as_bits(x: MaskLike) -> np.ndarray:
    """Return the mask as a float64 vector of 0.0/1.0 values."""
    if isinstance(x, BinaryMask):
        return x.bits.astype(np.float64)
    return BinaryMask(np.asarray(x)).bits.astype(np.float64)


def _check_square(q: np.ndarray, n: int) -> None:
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DimensionError(f"coefficient matrix must be square, got shape {q.shape}")
    if q.shape[0] != n:
        raise DimensionError(f"matrix is {q.shape[0]}x{q.shape[0]} but mask has length {n}")


@dataclass(frozen=True)
class QuboProblem:
    q: np.ndarray
    lambda1: float = 1.0
    lambda2: float = 1.0
    k: int = 0

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise DimensionError(f"q must be a non-empty square matrix, got shape {q.shape}")
        if not np.array_equal(q, q.T):
            raise ValueError("q must be exactly symmetric; use QuboProblem.symmetrized()")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("penalty weights must be non-negative")
        if not 0 <= int(self.k) <= q.shape[0]:
            raise ValueError(f"k={self.k} outside [0, {q.shape[0]}]")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        object.__setattr__(self, "k", int(self.k))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @classmethod
    def symmetrized(cls, q, lambda1=1.0, lambda2=1.0, k=0) -> "QuboProblem":
        """Build from an arbitrary square matrix by taking (q + q^T) / 2."""
        q = np.asarray(q, dtype=np.float64)
        return cls(0.5 * (q + q.T), lambda1, lambda2, k)


def energy(q: np.ndarray, x: MaskLike) -> float:
    """Quadratic form in summation form: sum_i q_ii x_i + sum_{i<j} 2 q_ij x_i x_j."""
    q = np.asarray(q, dtype=np.float64)
    xs = as_bits(x)
    _check_square(q, xs.size)
    diag = float(np.dot(np.diag(q), xs))
    upper = float(xs @ np.triu(q, 1) @ xs)
    return diag + 2.0 * upper


def cardinality_penalty(x: MaskLike, k: int, lambda1: float) -> float:
    if k < 0:
        raise ValueError("k must be non-negative")
    xs = as_bits(x)
    return float(lambda1) * (float(xs.sum()) - k) ** 2


def adhesion_penalty(x: MaskLike, lambda2: float) -> float:
    xs = as_bits(x)
    return float(lambda2) * float(np.dot(xs[:-1], xs[1:]))


def qaham_objective(p: QuboProblem, x: MaskLike) -> float:
    xs = as_bits(x)
    if xs.size != p.n:
        raise DimensionError(f"mask length {xs.size} != problem size {p.n}")
    return (
        energy(p.q, xs)
        + cardinality_penalty(xs, p.k, p.lambda1)
        + adhesion_penalty(xs, p.lambda2)
    )


@dataclass(frozen=True)
class ExplicitQubo:
    """Single symmetric matrix ``qprime`` and constant ``offset``.

    ``evaluate(x) == x^T qprime x + offset`` reproduces the full penalized
    objective of the problem it was folded from.
    """

    qprime: np.ndarray
    offset: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        qp = np.array(self.qprime, dtype=np.float64)
        if qp.ndim != 2 or qp.shape[0] != qp.shape[1] or qp.shape[0] < 1:
            raise DimensionError(f"qprime must be a non-empty square matrix, got {qp.shape}")
        if not np.array_equal(qp, qp.T):
            raise ValueError("qprime must be exactly symmetric")
        qp.setflags(write=False)
        object.__setattr__(self, "qprime", qp)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.qprime.shape[0]

    def evaluate(self, x: MaskLike) -> float:
        xs = as_bits(x)
        _check_square(self.qprime, xs.size)
        return float(xs @ self.qprime @ xs) + self.offset

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.n} {self.offset:.17g}\n")
        for row in self.qprime:
            buf.write(" ".join(f"{v:.17g}" for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExplicitQubo":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise DataFormatError("empty QUBO file")
        head = lines[0].split()
        if len(head) != 2:
            raise DataFormatError("first line must be 'n offset'")
        try:
            n = int(head[0])
            offset = float(head[1])
            rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
        except ValueError as exc:
            raise DataFormatError(f"non-numeric entry: {exc}") from None
        if n < 1 or len(rows) != n or any(len(r) != n for r in rows):
            raise DataFormatError(f"expected {n} rows of {n} coefficients")
        try:
            return cls(np.array(rows), offset)
        except ValueError as exc:
            raise DataFormatError(str(exc)) from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="ascii")

    @classmethod
    def load(cls, path) -> "ExplicitQubo":
        try:
            text = Path(path).read_text(encoding="ascii")
        except UnicodeDecodeError:
            raise DataFormatError(f"{path}: not a text QUBO file") from None
        return cls.from_text(text)


def to_explicit_qubo(p: QuboProblem) -> ExplicitQubo:
    """Fold both penalties into one matrix using x_a**2 == x_a."""
    n, lam1, lam2, k = p.n, p.lambda1, p.lambda2, p.k
    qp = p.q.copy()
    qp += lam1
    qp[np.diag_indices(n)] = np.diag(p.q) + lam1 * (1 - 2 * k)
    if n > 1 and lam2:
        idx = np.arange(n - 1)
        qp[idx, idx + 1] += lam2 / 2
        qp[idx + 1, idx] += lam2 / 2
    return ExplicitQubo(qp, lam1 * k * k, meta={"lambda1": lam1, "lambda2": lam2, "k": k})
