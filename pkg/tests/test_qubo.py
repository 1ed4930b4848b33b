import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qahan.errors import DataFormatError, DimensionError
from qahan.qubo import (
    BinaryMask,
    ExplicitQubo,
    QuboProblem,
    adhesion_penalty,
    cardinality_penalty,
    energy,
    qaham_objective,
    to_explicit_qubo,
)

from conftest import all_masks, random_symmetric


def brute_objective(q, lam1, lam2, k, x):
    """Three-term objective written out with explicit loops."""
    n = len(x)
    e = sum(q[i][j] * x[i] * x[j] for i in range(n) for j in range(n))
    return e + lam1 * (sum(x) - k) ** 2 + lam2 * sum(x[a] * x[a + 1] for a in range(n - 1))


class TestEnergy:
    def test_identity_all_ones(self):
        assert energy(np.eye(2), [1, 1]) == 2.0

    def test_zero_mask(self, rng):
        assert energy(random_symmetric(rng, 5), np.zeros(5)) == 0.0

    def test_hand_value(self):
        assert energy(np.array([[1.0, 2.0], [2.0, 3.0]]), [1, 1]) == 8.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            energy(np.eye(3), [1, 0])

    def test_matches_matrix_product(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 33))
            q = random_symmetric(rng, n)
            x = rng.integers(0, 2, n).astype(float)
            direct = float(x @ q @ x)
            assert energy(q, x) == pytest.approx(direct, rel=1e-12, abs=1e-12)


class TestPenalties:
    def test_cardinality_examples(self):
        assert cardinality_penalty([1, 1, 0], 2, 1.0) == 0.0
        assert cardinality_penalty([1, 1, 1], 1, 1.0) == 4.0
        assert cardinality_penalty([0, 0, 0], 100, 1.0) == 10000.0

    def test_adhesion_examples(self):
        assert adhesion_penalty([1, 0, 1, 0], 1.0) == 0.0
        assert adhesion_penalty([1, 1, 1], 1.0) == 2.0
        assert adhesion_penalty([1], 5.0) == 0.0

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            cardinality_penalty([1], -1, 1.0)

    @given(
        x=arrays(np.uint8, st.integers(1, 20), elements=st.integers(0, 1)),
        k=st.integers(0, 20),
        lo=st.floats(0, 10),
        delta=st.floats(0, 10),
    )
    def test_monotone_in_weights(self, x, k, lo, delta):
        assert cardinality_penalty(x, k, lo + delta) >= cardinality_penalty(x, k, lo)
        assert adhesion_penalty(x, lo + delta) >= adhesion_penalty(x, lo)


class TestObjective:
    def test_zero_q_feasible(self):
        p = QuboProblem(np.zeros((2, 2)), 1.0, 1.0, 1)
        assert qaham_objective(p, [1, 0]) == 0.0

    def test_reduces_to_energy(self):
        p = QuboProblem(np.eye(2), 0.0, 0.0, 0)
        assert qaham_objective(p, [1, 1]) == 2.0

    def test_sum_of_components(self, rng):
        q = random_symmetric(rng, 6)
        p = QuboProblem(q, 0.7, 1.3, 2)
        x = rng.integers(0, 2, 6)
        expected = energy(q, x) + cardinality_penalty(x, 2, 0.7) + adhesion_penalty(x, 1.3)
        assert qaham_objective(p, x) == pytest.approx(expected, rel=1e-12)
        assert qaham_objective(p, x) == pytest.approx(brute_objective(q, 0.7, 1.3, 2, list(x)), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            qaham_objective(QuboProblem(np.eye(3)), [1, 0])

    def test_symmetric_completion_invariance(self, rng):
        a = rng.normal(size=(7, 7))
        p = QuboProblem.symmetrized(a, 1.0, 0.5, 3)
        for _ in range(50):
            x = rng.integers(0, 2, 7).astype(float)
            raw = float(x @ a @ x) + cardinality_penalty(x, 3, 1.0) + adhesion_penalty(x, 0.5)
            assert qaham_objective(p, x) == pytest.approx(raw, rel=1e-12, abs=1e-12)

    def test_invalid_problem(self):
        with pytest.raises(ValueError):
            QuboProblem(np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(ValueError):
            QuboProblem(np.eye(2), k=3)
        with pytest.raises(ValueError):
            QuboProblem(np.eye(2), lambda1=-1)


class TestFolding:
    def test_no_penalty_is_identity(self, rng):
        q = random_symmetric(rng, 5)
        ex = to_explicit_qubo(QuboProblem(q, 0.0, 0.0, 2))
        np.testing.assert_array_equal(ex.qprime, q)
        assert ex.offset == 0.0

    def test_n3_exhaustive(self, rng):
        p = QuboProblem(random_symmetric(rng, 3), 1.5, 0.8, 2)
        ex = to_explicit_qubo(p)
        for x in all_masks(3):
            assert ex.evaluate(x) == pytest.approx(brute_objective(p.q, 1.5, 0.8, 2, list(x)), rel=1e-9)

    def test_n10_random_masks(self, rng):
        p = QuboProblem(random_symmetric(rng, 10), 1.0, 1.0, 4)
        ex = to_explicit_qubo(p)
        for _ in range(100):
            x = rng.integers(0, 2, 10)
            assert ex.evaluate(x) == pytest.approx(qaham_objective(p, x), rel=1e-9, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(1, 10),
        lam1=st.floats(0, 5),
        lam2=st.floats(0, 5),
        data=st.data(),
    )
    def test_exhaustive_property(self, n, lam1, lam2, data):
        k = data.draw(st.integers(0, n))
        seed = data.draw(st.integers(0, 2**32 - 1))
        q = random_symmetric(np.random.default_rng(seed), n)
        ex = to_explicit_qubo(QuboProblem(q, lam1, lam2, k))
        xs = all_masks(n)
        folded = np.einsum("si,ij,sj->s", xs, ex.qprime, xs) + ex.offset
        direct = (
            np.einsum("si,ij,sj->s", xs, q, xs)
            + lam1 * (xs.sum(axis=1) - k) ** 2
            + lam2 * (xs[:, :-1] * xs[:, 1:]).sum(axis=1)
        )
        np.testing.assert_allclose(folded, direct, rtol=1e-9, atol=1e-9)

    def test_qprime_symmetric(self, rng):
        ex = to_explicit_qubo(QuboProblem(random_symmetric(rng, 9), 1.0, 3.0, 4))
        np.testing.assert_array_equal(ex.qprime, ex.qprime.T)


class TestTextFormat:
    def test_round_trip_lossless(self, rng, tmp_path):
        ex = to_explicit_qubo(QuboProblem(random_symmetric(rng, 6), 1 / 3, np.pi, 2))
        ex.save(tmp_path / "q.txt")
        back = ExplicitQubo.load(tmp_path / "q.txt")
        np.testing.assert_array_equal(back.qprime, ex.qprime)
        assert back.offset == ex.offset

    def test_header(self):
        text = ExplicitQubo(np.eye(2), 4.0).to_text()
        assert text.splitlines()[0] == "2 4"
        assert text.splitlines()[1] == "1 0"

    @pytest.mark.parametrize(
        "text",
        ["", "2\n1 0\n0 1\n", "2 0\n1 0\n", "2 0\n1 x\n0 1\n", "2 0\n1 2\n0 1\n"],
    )
    def test_malformed(self, text):
        with pytest.raises(DataFormatError):
            ExplicitQubo.from_text(text)


class TestBinaryMask:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BinaryMask(np.array([0, 2]))

    def test_properties(self):
        m = BinaryMask([1, 0, 1], source="test")
        assert m.n == 3 and m.cardinality == 2 and len(m) == 3
        assert m == BinaryMask(np.array([1, 0, 1]))
