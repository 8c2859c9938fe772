import numpy as np
import pytest

from csl_lab.hilbert import DensityMatrix, HermitianOperator
from csl_lab.master_eq import (
    LindbladModel,
    StepSizeError,
    analytic_offdiag,
    integrate_master,
    lindblad_rhs,
)
from csl_lab.noise import SeededRng


def superoperator_oracle(model):
    """Explicit (d^2 x d^2) matrix of the generator, row-major vec convention:
    vec(A rho B) = (A kron B^T) vec(rho)."""
    d = model.dim
    eye = np.eye(d)
    sup = np.zeros((d * d, d * d), dtype=complex)
    if model.hamiltonian is not None:
        h = model.hamiltonian.matrix
        sup += -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in model.collapse_ops:
        a = op.matrix
        a2 = a @ a
        sup += -0.5 * model.lam * (
            np.kron(a2, eye) - 2.0 * np.kron(a, a.T) + np.kron(eye, a2.T)
        )
    return sup


def random_hermitian(dim, seed, scale=1.0):
    rng = SeededRng(seed, 0)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = HermitianOperator(0.5 * (m + m.conj().T))
    return HermitianOperator(h.matrix * (scale / h.spectral_norm))


def random_density(dim, seed):
    rng = SeededRng(seed, 1)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = m @ m.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def two_level_density(p1=0.6):
    amps = np.sqrt([p1, 1 - p1])
    return DensityMatrix(np.outer(amps, amps))


class TestLindbladRhs:
    def test_trivial_zero(self):
        model = LindbladModel(HermitianOperator(np.zeros((2, 2))), [], 0.0)
        out = lindblad_rhs(two_level_density(), model)
        assert np.abs(out).max() == 0.0

    def test_offdiagonal_decay_rate(self):
        a1, a2, lam = 1.2, -0.4, 0.9
        model = LindbladModel(None, [HermitianOperator(np.diag([a1, a2]))], lam)
        rho = two_level_density(0.6)
        out = lindblad_rhs(rho, model)
        want12 = -0.5 * lam * (a1 - a2) ** 2 * rho.matrix[0, 1]
        assert out[0, 1] == pytest.approx(want12, rel=1e-12)
        assert abs(out[0, 0]) < 1e-15
        assert abs(out[1, 1]) < 1e-15

    @pytest.mark.parametrize("seed", [2, 7, 13])
    def test_matches_superoperator_oracle(self, seed):
        dim = 4
        h = random_hermitian(dim, seed)
        ops = [random_hermitian(dim, seed + 50), random_hermitian(dim, seed + 60)]
        model = LindbladModel(h, ops, lam=0.7)
        rho = random_density(dim, seed)
        got = lindblad_rhs(rho, model)
        want = (superoperator_oracle(model) @ rho.matrix.reshape(-1)).reshape(dim, dim)
        assert np.abs(got - want).max() < 1e-10

    def test_output_traceless_hermitian(self):
        model = LindbladModel(random_hermitian(3, 5), [random_hermitian(3, 6)], 1.1)
        out = lindblad_rhs(random_density(3, 4), model)
        assert abs(np.trace(out)) < 1e-12
        assert np.abs(out - out.conj().T).max() < 1e-12

    def test_diagonal_fast_path_matches_general(self):
        # the same channels fed as diagonals and as dense matrices must give
        # identical dissipators
        f1 = np.array([0.0, 0.7, 1.4, 2.8])
        f2 = np.array([1.0, -1.0, 0.5, 0.0])
        diag_model = LindbladModel(
            None, [HermitianOperator(np.diag(f1)), HermitianOperator(np.diag(f2))], 0.8
        )
        assert diag_model._damping is not None
        rho = random_density(4, 9)
        got = lindblad_rhs(rho, diag_model)
        want = np.zeros_like(got)
        for f in (f1, f2):
            a = np.diag(f.astype(complex))
            a2 = a @ a
            want -= 0.4 * (a2 @ rho.matrix - 2 * a @ rho.matrix @ a + rho.matrix @ a2)
        assert np.abs(got - want).max() < 1e-14

    def test_dimension_mismatch(self):
        model = LindbladModel(None, [HermitianOperator(np.eye(2))], 1.0)
        with pytest.raises(ValueError, match="dimension"):
            lindblad_rhs(random_density(3, 1), model)


class TestIntegrateMaster:
    def test_free_case_is_constant(self):
        model = LindbladModel(HermitianOperator(np.zeros((2, 2))), [], 0.0)
        rho0 = two_level_density()
        traj = integrate_master(rho0, model, 1.0, 0.05)
        assert np.abs(traj.final.matrix - rho0.matrix).max() < 1e-15

    def test_two_level_closed_form(self):
        a1, a2, lam = 1.0, -1.0, 1.0
        model = LindbladModel(None, [HermitianOperator(np.diag([a1, a2]))], lam)
        rho0 = two_level_density(0.6)
        traj = integrate_master(rho0, model, 1.0, 0.002, record_times=[0.25, 0.5, 1.0])
        for t, rho in zip(traj.times, traj.matrices):
            want = analytic_offdiag(np.sqrt(0.6), np.sqrt(0.4), a1, a2, lam, t)
            assert abs(rho.matrix[0, 1] - want) / abs(want) < 1e-8

    def test_fourth_order_convergence(self):
        a1, a2, lam, t = 1.0, -1.0, 1.0, 1.0
        model = LindbladModel(None, [HermitianOperator(np.diag([a1, a2]))], lam)
        rho0 = two_level_density(0.6)
        want = analytic_offdiag(np.sqrt(0.6), np.sqrt(0.4), a1, a2, lam, t)

        def error(dt):
            traj = integrate_master(rho0, model, t, dt, record_times=[t])
            return abs(traj.final.matrix[0, 1] - want)

        ratio = error(0.04) / error(0.02)
        assert 8.0 < ratio < 32.0

    def test_trace_and_hermiticity_preserved(self):
        model = LindbladModel(random_hermitian(4, 3), [random_hermitian(4, 8)], 0.6)
        rho0 = random_density(4, 2)
        traj = integrate_master(rho0, model, 2.0, 0.01)
        for rho in traj.matrices:
            assert abs(np.trace(rho.matrix).real - 1.0) < 1e-9
            assert np.abs(rho.matrix - rho.matrix.conj().T).max() < 1e-10

    def test_diagonals_frozen_without_hamiltonian(self):
        model = LindbladModel(None, [HermitianOperator(np.diag([0.0, 1.0, 2.5]))], 1.3)
        rho0 = random_density(3, 6)
        traj = integrate_master(rho0, model, 1.5, 0.01)
        d0 = np.diagonal(rho0.matrix).real
        for rho in traj.matrices:
            assert np.abs(np.diagonal(rho.matrix).real - d0).max() < 1e-12

    def test_step_rule_enforced(self):
        model = LindbladModel(random_hermitian(2, 1, scale=10.0), [], 0.0)
        with pytest.raises(StepSizeError):
            integrate_master(two_level_density(), model, 1.0, 0.1)

    def test_record_times_must_hit_grid(self):
        model = LindbladModel(None, [HermitianOperator(np.diag([1.0, -1.0]))], 1.0)
        with pytest.raises(ValueError, match="grid"):
            integrate_master(two_level_density(), model, 1.0, 0.01, record_times=[0.0153])

    def test_csv_layout(self, tmp_path):
        model = LindbladModel(None, [HermitianOperator(np.diag([1.0, -1.0]))], 1.0)
        traj = integrate_master(two_level_density(), model, 0.1, 0.05)
        path = tmp_path / "rho.csv"
        traj.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "time,row,col,re,im"
        assert len(lines) == 1 + len(traj.times) * 4


class TestAnalyticOffdiag:
    def test_diagonal_entry_never_decays(self):
        c = 0.6 + 0.2j
        for t in (0.0, 1.0, 50.0):
            val = analytic_offdiag(c, c, 1.7, 1.7, 2.0, t)
            assert val == pytest.approx(abs(c) ** 2, rel=1e-14)

    def test_unit_case(self):
        val = analytic_offdiag(1.0, 1.0, 2.0, 0.0, 1.0, 1.0)
        assert val == pytest.approx(np.exp(-2.0), rel=1e-14)

    def test_quadratic_in_gap(self):
        base = analytic_offdiag(1.0, 1.0, 1.0, 0.0, 1.0, 1.0)
        wide = analytic_offdiag(1.0, 1.0, 2.0, 0.0, 1.0, 1.0)
        assert np.log(wide) == pytest.approx(4.0 * np.log(base), rel=1e-12)
