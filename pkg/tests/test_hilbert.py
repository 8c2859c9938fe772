import numpy as np
import pytest

from csl_lab.hilbert import (
    DensityMatrix,
    HermitianOperator,
    QuantumState,
    eigendecompose,
    expectation,
    joint_eigenbasis,
)
from csl_lab.noise import SeededRng


def expectation_oracle(psi, matrix):
    """Direct double-sum evaluation, independent of the library path."""
    num = 0.0 + 0.0j
    den = 0.0
    for i in range(len(psi)):
        den += abs(psi[i]) ** 2
        for j in range(len(psi)):
            num += np.conj(psi[i]) * matrix[i, j] * psi[j]
    return (num / den).real


def random_hermitian(dim, seed):
    rng = SeededRng(seed, 0)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (m + m.conj().T)


class TestExpectation:
    def test_eigenstate(self):
        op = HermitianOperator(np.diag([2.5, -1.0]))
        state = QuantumState(np.array([1.0, 0.0], dtype=complex), normalized=True)
        assert expectation(state, op) == pytest.approx(2.5, abs=1e-14)

    def test_born_weights(self):
        a1, a2 = 0.7, -0.3
        op = HermitianOperator(np.diag([a1, a2]))
        state = QuantumState(np.sqrt([0.6, 0.4]).astype(complex), normalized=True)
        assert expectation(state, op) == pytest.approx(0.6 * a1 + 0.4 * a2, abs=1e-14)

    @pytest.mark.parametrize("seed", [3, 11, 99])
    def test_matches_direct_summation_oracle(self, seed):
        rng = SeededRng(seed, 1)
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        matrix = random_hermitian(4, seed)
        op = HermitianOperator(matrix)
        state = QuantumState(psi)
        want = expectation_oracle(psi, matrix)
        assert expectation(state, op) == pytest.approx(want, rel=1e-12)

    def test_phase_and_scale_invariance(self):
        matrix = random_hermitian(5, 17)
        op = HermitianOperator(matrix)
        rng = SeededRng(17, 2)
        psi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        base = expectation(QuantumState(psi), op)
        scaled = expectation(QuantumState(3.7 * np.exp(1j * 0.9) * psi), op)
        assert scaled == pytest.approx(base, rel=1e-12)

    def test_linear_in_operator(self):
        m1 = random_hermitian(3, 5)
        m2 = random_hermitian(3, 6)
        psi = SeededRng(5, 3).standard_normal(3) + 0j
        state = QuantumState(psi)
        lhs = expectation(state, HermitianOperator(2.0 * m1 + 0.5 * m2))
        rhs = 2.0 * expectation(state, HermitianOperator(m1)) + 0.5 * expectation(
            state, HermitianOperator(m2)
        )
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_dimension_mismatch(self):
        op = HermitianOperator(np.eye(3))
        state = QuantumState(np.array([1.0, 0.0], dtype=complex))
        with pytest.raises(ValueError, match="mismatch"):
            expectation(state, op)

    def test_zero_norm(self):
        op = HermitianOperator(np.eye(2))
        state = QuantumState(np.zeros(2, dtype=complex))
        with pytest.raises(ValueError, match="zero-norm"):
            expectation(state, op)


class TestEigendecompose:
    def test_diagonal(self):
        op = HermitianOperator(np.diag([4.0, 2.0]))
        vals, vecs = eigendecompose(op)
        assert np.allclose(vals, [2.0, 4.0])
        assert np.allclose(np.abs(vecs), [[0, 1], [1, 0]])

    def test_exchange_symmetric(self):
        op = HermitianOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))
        vals, _ = eigendecompose(op)
        assert np.allclose(vals, [-1.0, 1.0])

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_reconstruction(self, seed):
        matrix = random_hermitian(6, seed)
        op = HermitianOperator(matrix)
        vals, vecs = eigendecompose(op)
        rebuilt = (vecs * vals) @ vecs.conj().T
        scale = np.abs(matrix).max()
        assert np.abs(rebuilt - matrix).max() < 1e-10 * scale
        assert np.all(np.diff(vals) >= -1e-12)
        assert np.abs(vecs.conj().T @ vecs - np.eye(6)).max() < 1e-10

    def test_sign_convention(self):
        vals, vecs = eigendecompose(HermitianOperator(random_hermitian(5, 8)))
        for j in range(5):
            col = vecs[:, j]
            pivot = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
            assert pivot.real > 0
            assert abs(pivot.imag) < 1e-12

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            HermitianOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestQuantumState:
    def test_normalized_flag_validated(self):
        with pytest.raises(ValueError, match="normalized"):
            QuantumState(np.array([1.0, 1.0], dtype=complex), normalized=True)

    def test_immutable(self):
        state = QuantumState(np.array([1.0, 0.0], dtype=complex))
        with pytest.raises(ValueError):
            state.amplitudes[0] = 2.0

    def test_normalize(self):
        state = QuantumState(np.array([3.0, 4.0], dtype=complex))
        assert state.normalize().norm_sq == pytest.approx(1.0, abs=1e-15)


class TestDensityMatrix:
    def test_from_state(self):
        state = QuantumState(np.sqrt([0.6, 0.4]).astype(complex))
        rho = DensityMatrix.from_state(state)
        assert rho.matrix[0, 0].real == pytest.approx(0.6)
        assert rho.min_eigenvalue > -1e-12

    def test_trace_validation(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(np.diag([0.7, 0.4]))

    def test_psd_validation(self):
        with pytest.raises(ValueError, match="eigenvalue"):
            DensityMatrix(np.diag([1.5, -0.5]))


class TestJointEigenbasis:
    def test_commuting_diagonals(self):
        a1 = HermitianOperator(np.diag([0.0, 0.0, 1.0, 1.0]))
        a2 = HermitianOperator(np.diag([0.0, 1.0, 0.0, 1.0]))
        basis = joint_eigenbasis([a1, a2])
        table = {tuple(row) for row in basis.eigenvalues}
        assert table == {(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)}

    def test_degenerate_block_refinement(self):
        # first operator leaves a 2-dim degenerate block; the second splits it
        a1 = HermitianOperator(np.diag([1.0, 1.0, 3.0]))
        x = np.zeros((3, 3), dtype=complex)
        x[0, 1] = x[1, 0] = 1.0
        a2 = HermitianOperator(x)
        basis = joint_eigenbasis([a1, a2])
        for op in (a1, a2):
            rotated = basis.vectors.conj().T @ op.matrix @ basis.vectors
            off = rotated - np.diag(np.diagonal(rotated))
            assert np.abs(off).max() < 1e-10

    def test_non_commuting_rejected(self):
        sx = HermitianOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))
        sz = HermitianOperator(np.diag([1.0, -1.0]))
        with pytest.raises(ValueError, match="commute"):
            joint_eigenbasis([sx, sz])

    def test_reproducible(self):
        ops = [HermitianOperator(random_hermitian(4, 3))]
        b1 = joint_eigenbasis(ops)
        b2 = joint_eigenbasis(ops)
        assert np.array_equal(b1.vectors, b2.vectors)

    def test_branch_weights(self):
        op = HermitianOperator(np.diag([1.0, -1.0]))
        basis = joint_eigenbasis([op])
        state = QuantumState(np.sqrt([0.6, 0.4]).astype(complex), normalized=True)
        weights = basis.branch_weights(state)
        # ascending eigenvalue order: branch 0 is a = -1
        assert weights == pytest.approx([0.4, 0.6], abs=1e-14)
