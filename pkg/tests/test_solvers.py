import itertools
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qahan.errors import CapabilityError, ConfigError, ScheduleError
from qahan.qubo import ExplicitQubo, QuboProblem, qaham_objective, to_explicit_qubo
from qahan.solvers import (
    AnnealSchedule,
    ExactSolver,
    SaConfig,
    SaSolver,
    anneal_state,
    make_solver,
    solve_exact,
    solve_qa_sim,
    solve_sa,
)

from conftest import random_symmetric


def enumerate_min(qp, offset=0.0):
    """Lexicographic brute force; strict '<' keeps the first (smallest) minimizer."""
    n = qp.shape[0]
    best, best_x = math.inf, None
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, dtype=float)
        e = float(x @ qp @ x) + offset
        if e < best:
            best, best_x = e, bits
    return best, np.array(best_x)


def random_qubo(rng, n):
    return ExplicitQubo(random_symmetric(rng, n), float(rng.normal()))


class TestExact:
    def test_identity(self):
        r = solve_exact(ExplicitQubo(np.eye(4)))
        assert r.x_opt.cardinality == 0 and r.energy == 0.0

    def test_negative_identity(self):
        r = solve_exact(ExplicitQubo(-np.eye(3)))
        np.testing.assert_array_equal(r.x_opt.bits, [1, 1, 1])
        assert r.energy == -3.0

    def test_matches_enumeration(self, rng):
        q = random_qubo(rng, 10)
        e, x = enumerate_min(q.qprime, q.offset)
        r = solve_exact(q)
        np.testing.assert_array_equal(r.x_opt.bits, x)
        assert r.energy == pytest.approx(e, rel=1e-12)

    def test_tie_break_all_zero(self):
        r = solve_exact(ExplicitQubo(np.zeros((6, 6))))
        np.testing.assert_array_equal(r.x_opt.bits, np.zeros(6))

    def test_tie_break_lexicographic(self):
        # x = [0,1] and [1,0] both reach -1; [0,1] is lexicographically smaller
        q = ExplicitQubo(np.array([[-1.0, 1.0], [1.0, -1.0]]))
        np.testing.assert_array_equal(solve_exact(q).x_opt.bits, [0, 1])

    def test_refuses_large(self):
        with pytest.raises(CapabilityError):
            solve_exact(ExplicitQubo(np.eye(25)))

    def test_energy_matches_objective(self, rng):
        p = QuboProblem(random_symmetric(rng, 8), 1.0, 1.0, 3)
        r = solve_exact(to_explicit_qubo(p))
        assert r.energy == pytest.approx(qaham_objective(p, r.x_opt), rel=1e-9)


class TestSa:
    def test_identity(self):
        for cfg in (SaConfig(sweeps=10), SaConfig(), SaConfig(sweeps=50, restarts=3)):
            assert solve_sa(ExplicitQubo(np.eye(5)), cfg, seed=1).energy == 0.0

    def test_deterministic(self, rng):
        q = random_qubo(rng, 20)
        a = solve_sa(q, SaConfig(sweeps=200, restarts=2), seed=7)
        b = solve_sa(q, SaConfig(sweeps=200, restarts=2), seed=7)
        assert a.x_opt == b.x_opt and a.energy == b.energy
        np.testing.assert_array_equal(a.diagnostics["best_trace"], b.diagnostics["best_trace"])

    def test_best_trace_non_increasing(self, rng):
        r = solve_sa(random_qubo(rng, 30), SaConfig(sweeps=300, restarts=3), seed=3)
        trace = r.diagnostics["best_trace"]
        assert trace.size == 900
        assert np.all(np.diff(trace) <= 0)

    def test_never_below_exact(self, rng):
        for s in range(20):
            q = random_qubo(rng, 10)
            assert solve_sa(q, SaConfig(sweeps=30), seed=s).energy >= solve_exact(q).energy - 1e-12

    def test_matches_exact_n12(self, rng):
        hits = 0
        for s in range(30):
            q = random_qubo(rng, 12)
            hits += math.isclose(solve_sa(q, SaConfig(restarts=4), s).energy, solve_exact(q).energy, rel_tol=1e-9)
        assert hits >= 28

    def test_energy_recomputed(self, rng):
        q = random_qubo(rng, 40)
        r = solve_sa(q, SaConfig(sweeps=100), seed=0)
        assert r.energy == pytest.approx(q.evaluate(r.x_opt), rel=1e-12)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SaConfig(sweeps=0)
        with pytest.raises(ConfigError):
            SaConfig(t_initial=1.0, t_final=2.0)

    def test_default_ladder(self):
        q = ExplicitQubo(np.array([[-4.0, 2.0], [2.0, 1.0]]))
        temps = SaConfig(sweeps=5).temperatures(q)
        assert temps[0] == 4.0 and temps[-1] == pytest.approx(4e-3)
        assert np.all(np.diff(temps) < 0)


def two_level_oracle(e1, total_time):
    """Integrate i dpsi/dt = H(t) psi for one qubit with H_P = diag(0, e1)."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    hp = np.diag([0.0, e1]).astype(complex)

    def rhs(t, y):
        s = t / total_time
        return -1j * (((1 - s) * -sx + s * hp) @ y)

    y0 = np.array([1, 1], dtype=complex) / np.sqrt(2)
    sol = solve_ivp(rhs, (0, total_time), y0, rtol=1e-10, atol=1e-12)
    return np.abs(sol.y[:, -1]) ** 2


class TestQaSim:
    def test_single_qubit_adiabatic(self):
        q = ExplicitQubo(np.array([[1.0]]))
        sched = AnnealSchedule(total_time=20.0, steps=2000)
        psi, dev = anneal_state(q, sched)
        probs = np.abs(psi) ** 2
        oracle = two_level_oracle(1.0, 20.0)
        np.testing.assert_allclose(probs, oracle, atol=1e-3)
        r = solve_qa_sim(q, sched, shots=10000, seed=0)
        np.testing.assert_array_equal(r.x_opt.bits, [0])
        assert r.diagnostics["best_frequency"] >= 0.99
        assert dev < 1e-8

    def test_quench_is_uniform(self, rng):
        n, shots = 3, 10000
        q = random_qubo(rng, n)
        r = solve_qa_sim(q, AnnealSchedule(total_time=1e-9, steps=1), shots=shots, seed=5)
        counts = r.diagnostics["counts"]
        p = 1 / 2**n
        sigma = math.sqrt(shots * p * (1 - p))
        assert np.all(np.abs(counts - shots * p) <= 3 * sigma)

    def test_n4_matches_exact(self, rng):
        q = random_qubo(rng, 4)
        r = solve_qa_sim(q, AnnealSchedule(total_time=20.0), shots=1000, seed=2)
        assert r.x_opt == solve_exact(q).x_opt
        assert r.energy == pytest.approx(q.evaluate(r.x_opt), rel=1e-12)

    def test_norm_preserved(self, rng):
        _, dev = anneal_state(random_qubo(rng, 6), AnnealSchedule(total_time=3.0))
        assert dev < 1e-8

    def test_ground_probability_grows_with_time(self):
        rng = np.random.default_rng(77)
        shots = 10000
        checked = 0
        while checked < 5:
            q = random_qubo(rng, 4)
            energies = [q.evaluate(np.array(b)) for b in itertools.product((0, 1), repeat=4)]
            ordered = np.sort(energies)
            if ordered[1] - ordered[0] < 1e-6:
                continue
            ground = int(np.argmin(energies))
            freqs = []
            for total in (1.0, 5.0, 20.0):
                r = solve_qa_sim(q, AnnealSchedule(total_time=total), shots=shots, seed=checked)
                freqs.append(r.diagnostics["counts"][ground] / shots)
            for lo, hi in zip(freqs, freqs[1:]):
                slack = 2 * math.sqrt(lo * (1 - lo) / shots + hi * (1 - hi) / shots)
                assert hi >= lo - slack
            checked += 1

    def test_refuses_large(self):
        with pytest.raises(CapabilityError):
            solve_qa_sim(ExplicitQubo(np.eye(17)))

    def test_non_monotone_schedule(self):
        bumpy = AnnealSchedule(total_time=1.0, a_of_s=lambda s: 1 - s + 0.3 * math.sin(6 * math.pi * s))
        with pytest.raises(ScheduleError):
            solve_qa_sim(ExplicitQubo(np.eye(2)), bumpy)

    def test_bad_boundary(self):
        with pytest.raises(ScheduleError):
            AnnealSchedule(total_time=1.0, b_of_s=lambda s: 0.5 * s).sample()
        with pytest.raises(ScheduleError):
            AnnealSchedule(total_time=0.0)

    def test_default_steps(self):
        assert AnnealSchedule(total_time=20.0).n_steps == 2000


class TestContract:
    def test_exact_dispatch(self, rng):
        q = random_qubo(rng, 8)
        a = make_solver("exact").solve(q, 0)
        assert a.x_opt == solve_exact(q).x_opt and a.energy == solve_exact(q).energy

    def test_sa_dispatch(self, rng):
        q = random_qubo(rng, 15)
        cfg = SaConfig(sweeps=123, restarts=2)
        a = make_solver("sa", sweeps=123, restarts=2).solve(q, 9)
        b = solve_sa(q, cfg, 9)
        assert a.x_opt == b.x_opt and a.energy == b.energy

    def test_unknown_backend(self):
        with pytest.raises(ConfigError):
            make_solver("dwave")

    def test_bad_params(self):
        with pytest.raises(ConfigError):
            make_solver("sa", temperature=3)

    @pytest.mark.parametrize("solver", [ExactSolver(), SaSolver(SaConfig(sweeps=100)), make_solver("qa_sim", total_time=2.0)])
    def test_energy_consistent(self, solver, rng):
        p = QuboProblem(random_symmetric(rng, 6), 1.0, 1.0, 2)
        r = solver.solve(to_explicit_qubo(p), 4)
        assert r.energy == pytest.approx(qaham_objective(p, r.x_opt), rel=1e-9)
        assert r.solver_name == solver.name
