"""QUBO minimizers behind a common ``solve(qubo, seed)`` contract.

Three backends are provided:

* ``exact``  -- exhaustive enumeration, the ground-truth oracle (n <= 24).
* ``sa``     -- single-bit-flip Metropolis simulated annealing (any n).
* ``qa_sim`` -- state-vector simulation of a transverse-field anneal (n <= 16).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numba
import numpy as np

from .errors import CapabilityError, ConfigError, ScheduleError
from .qubo import BinaryMask, ExplicitQubo

EXACT_MAX_N = 24
QA_SIM_MAX_N = 16


@dataclass
class SolveResult:
    x_opt: BinaryMask
    energy: float
    solver_name: str
    seed: int
    diagnostics: dict = field(default_factory=dict)


def _result(q: ExplicitQubo, bits, name: str, seed: int, **diagnostics) -> SolveResult:
    mask = BinaryMask(np.asarray(bits, dtype=np.uint8), source=name)
    # Always re-evaluate from scratch: incremental energies drift.
    return SolveResult(mask, q.evaluate(mask), name, int(seed), diagnostics)


# --------------------------------------------------------------------------
# exhaustive enumeration


def _bits_of(indices: np.ndarray, n: int) -> np.ndarray:
    # index 0 of the mask is the most significant bit
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts) & 1).astype(np.float64)


def solve_exact(q: ExplicitQubo, seed: int = 0, chunk: int = 1 << 16) -> SolveResult:
    """Global minimizer by enumerating all 2**n masks.

    Ties go to the lexicographically smallest bit string, which is the
    smallest integer when x[0] is read as the most significant bit.
    """
    n = q.n
    if n > EXACT_MAX_N:
        raise CapabilityError(f"exact solver limited to n <= {EXACT_MAX_N}, got n={n}")
    best_e = math.inf
    best_idx = 0
    total = 1 << n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        xs = _bits_of(idx, n)
        e = np.einsum("si,si->s", xs @ q.qprime, xs)
        j = int(np.argmin(e))
        if e[j] < best_e:
            best_e, best_idx = float(e[j]), int(idx[j])
    bits = _bits_of(np.array([best_idx]), n)[0]
    return _result(q, bits, "exact", seed, states=total)


# --------------------------------------------------------------------------
# simulated annealing


@dataclass(frozen=True)
class SaConfig:
    """Metropolis schedule. ``t_initial=None`` means max|Q'| of the problem;
    ``t_final=None`` means ``1e-3 * t_initial``."""

    sweeps: int = 1000
    t_initial: Optional[float] = None
    t_final: Optional[float] = None
    restarts: int = 4

    def __post_init__(self):
        if self.sweeps < 1 or self.restarts < 1:
            raise ConfigError("sweeps and restarts must be positive")
        if self.t_initial is not None and self.t_initial <= 0:
            raise ConfigError("t_initial must be positive")
        if self.t_final is not None and self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if (
            self.t_initial is not None
            and self.t_final is not None
            and self.t_final >= self.t_initial
        ):
            raise ConfigError("t_final must be below t_initial")

    def temperatures(self, q: ExplicitQubo) -> np.ndarray:
        t0 = self.t_initial
        if t0 is None:
            t0 = float(np.max(np.abs(q.qprime))) or 1.0
        t1 = self.t_final if self.t_final is not None else 1e-3 * t0
        if t1 >= t0:
            raise ConfigError("t_final must be below t_initial")
        return np.geomspace(t0, t1, self.sweeps)


@numba.njit(cache=True)
def _sweep(qp, x, local, e, best_e, best_x, flips, u, beta):
    """One Metropolis sweep; ``local`` caches Q'x and is updated on accept."""
    n = x.size
    for s in range(flips.size):
        i = flips[s]
        d = 1.0 - 2.0 * x[i]
        de = d * (2.0 * local[i] - 2.0 * qp[i, i] * x[i] + qp[i, i])
        if de <= 0.0 or u[s] < math.exp(-de * beta):
            x[i] += d
            for j in range(n):
                local[j] += d * qp[j, i]
            e += de
            if e < best_e:
                best_e = e
                for j in range(n):
                    best_x[j] = x[j]
    return e, best_e


def solve_sa(q: ExplicitQubo, cfg: SaConfig = SaConfig(), seed: int = 0) -> SolveResult:
    """Best state seen by single-flip Metropolis on a geometric temperature ladder.

    Each restart begins from a uniformly random state. The whole run draws
    from one ``numpy.random.Generator`` seeded with ``seed``.
    """
    rng = np.random.default_rng(seed)
    n = q.n
    qp = np.ascontiguousarray(q.qprime)
    betas = 1.0 / cfg.temperatures(q)
    best_x = np.zeros(n)
    best_e = float(best_x @ qp @ best_x)
    trace = np.empty(cfg.sweeps * cfg.restarts)
    s = 0
    for _ in range(cfg.restarts):
        x = rng.integers(0, 2, size=n).astype(np.float64)
        local = qp @ x
        e = float(x @ local)
        if e < best_e:
            best_e, best_x = e, x.copy()
        for beta in betas:
            flips = rng.integers(0, n, size=n)
            u = rng.random(n)
            e, best_e = _sweep(qp, x, local, e, best_e, best_x, flips, u, beta)
            trace[s] = best_e + q.offset
            s += 1
    return _result(
        q,
        best_x,
        "sa",
        seed,
        sweeps=cfg.sweeps,
        restarts=cfg.restarts,
        t_initial=float(1.0 / betas[0]),
        t_final=float(1.0 / betas[-1]),
        best_trace=trace,
    )


# --------------------------------------------------------------------------
# transverse-field anneal, state-vector simulation


def _linear_a(s):
    return 1.0 - s


def _linear_b(s):
    return s


@dataclass(frozen=True)
class AnnealSchedule:
    """H(t) = A(t) H0 + B(t) HP sampled at step midpoints.

    ``a_of_s`` and ``b_of_s`` take the normalized time s = t / total_time in
    [0, 1]. ``steps=None`` means 100 steps per unit of anneal time.
    """

    total_time: float = 20.0
    steps: Optional[int] = None
    a_of_s: Callable[[float], float] = _linear_a
    b_of_s: Callable[[float], float] = _linear_b

    def __post_init__(self):
        if not self.total_time > 0:
            raise ScheduleError("total_time must be positive")
        if self.steps is not None and self.steps < 1:
            raise ScheduleError("steps must be positive")

    @property
    def n_steps(self) -> int:
        if self.steps is not None:
            return int(self.steps)
        return max(1, int(math.ceil(100 * self.total_time)))

    def sample(self):
        """Return (dt, a, b) arrays at step midpoints, after validating."""
        k = self.n_steps
        a_ends = (float(self.a_of_s(0.0)), float(self.a_of_s(1.0)))
        b_ends = (float(self.b_of_s(0.0)), float(self.b_of_s(1.0)))
        if not (
            math.isclose(a_ends[0], 1.0, abs_tol=1e-12)
            and math.isclose(a_ends[1], 0.0, abs_tol=1e-12)
            and math.isclose(b_ends[0], 0.0, abs_tol=1e-12)
            and math.isclose(b_ends[1], 1.0, abs_tol=1e-12)
        ):
            raise ScheduleError("schedule must satisfy A(0)=1, A(T)=0, B(0)=0, B(T)=1")
        s = (np.arange(k) + 0.5) / k
        a = np.array([self.a_of_s(v) for v in s], dtype=np.float64)
        b = np.array([self.b_of_s(v) for v in s], dtype=np.float64)
        if np.any(np.diff(a) > 0) or np.any(np.diff(b) < 0):
            raise ScheduleError("A must be non-increasing and B non-decreasing")
        return self.total_time / k, a, b


def diagonal_energies(q: ExplicitQubo) -> np.ndarray:
    """Energy of every computational basis state, x[0] most significant."""
    n = q.n
    xs = _bits_of(np.arange(1 << n, dtype=np.int64), n)
    return np.einsum("si,si->s", xs @ q.qprime, xs) + q.offset


def _apply_transverse(psi: np.ndarray, n: int, theta: float) -> np.ndarray:
    # exp(-i dt A H0) with H0 = -sum X_j factorizes into exp(+i theta X_j)
    c, s = math.cos(theta), 1j * math.sin(theta)
    psi = psi.reshape((2,) * n)
    for ax in range(n):
        lo = np.take(psi, 0, axis=ax)
        hi = np.take(psi, 1, axis=ax)
        psi = np.stack((c * lo + s * hi, s * lo + c * hi), axis=ax)
    return psi.reshape(-1)


def anneal_state(q: ExplicitQubo, schedule: AnnealSchedule):
    """Evolve the uniform superposition under the schedule.

    Returns ``(psi, max_norm_deviation)`` where the deviation is the largest
    | ||psi|| - 1 | observed after any step.
    """
    n = q.n
    if n > QA_SIM_MAX_N:
        raise CapabilityError(f"qa_sim limited to n <= {QA_SIM_MAX_N}, got n={n}")
    dt, a, b = schedule.sample()
    hp = diagonal_energies(q)
    psi = np.full(1 << n, 1.0 / math.sqrt(1 << n), dtype=np.complex128)
    worst = 0.0
    for ak, bk in zip(a, b):
        psi = psi * np.exp(-1j * dt * bk * hp)
        psi = _apply_transverse(psi, n, dt * ak)
        worst = max(worst, abs(math.sqrt(float(np.vdot(psi, psi).real)) - 1.0))
    return psi, worst


def solve_qa_sim(
    q: ExplicitQubo,
    schedule: AnnealSchedule = AnnealSchedule(),
    shots: int = 1000,
    seed: int = 0,
) -> SolveResult:
    """Sample the annealed state ``shots`` times; keep the lowest-energy sample."""
    if shots < 1:
        raise ConfigError("shots must be positive")
    psi, worst = anneal_state(q, schedule)
    probs = np.abs(psi) ** 2
    probs /= probs.sum()
    rng = np.random.default_rng(seed)
    samples = rng.choice(probs.size, size=shots, p=probs)
    counts = np.bincount(samples, minlength=probs.size)
    seen = np.flatnonzero(counts)
    hp = diagonal_energies(q)
    best = int(seen[np.argmin(hp[seen])])
    bits = _bits_of(np.array([best]), q.n)[0]
    return _result(
        q,
        bits,
        "qa_sim",
        seed,
        shots=shots,
        steps=schedule.n_steps,
        total_time=schedule.total_time,
        max_norm_deviation=worst,
        best_frequency=counts[best] / shots,
        counts=counts,
    )


# --------------------------------------------------------------------------
# sampler contract


class Solver(Protocol):
    name: str

    def solve(self, q: ExplicitQubo, seed: int) -> SolveResult: ...


@dataclass(frozen=True)
class ExactSolver:
    name: str = "exact"

    def solve(self, q: ExplicitQubo, seed: int) -> SolveResult:
        return solve_exact(q, seed)


@dataclass(frozen=True)
class SaSolver:
    config: SaConfig = SaConfig()
    name: str = "sa"

    def solve(self, q: ExplicitQubo, seed: int) -> SolveResult:
        return solve_sa(q, self.config, seed)


@dataclass(frozen=True)
class QaSimSolver:
    schedule: AnnealSchedule = AnnealSchedule()
    shots: int = 1000
    name: str = "qa_sim"

    def solve(self, q: ExplicitQubo, seed: int) -> SolveResult:
        return solve_qa_sim(q, self.schedule, self.shots, seed)


BACKENDS = ("exact", "sa", "qa_sim")


def make_solver(backend: str, **params) -> Solver:
    """Build a backend by name; unknown names or parameters raise ConfigError."""
    try:
        if backend == "exact":
            return ExactSolver(**params)
        if backend == "sa":
            return SaSolver(SaConfig(**params))
        if backend == "qa_sim":
            shots = params.pop("shots", 1000)
            return QaSimSolver(AnnealSchedule(**params), shots)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for backend {backend!r}: {exc}") from None
    raise ConfigError(f"unknown solver backend {backend!r}; expected one of {BACKENDS}")
