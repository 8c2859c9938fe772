import math

import numpy as np
import pytest
from scipy import stats

from csl_lab.hilbert import HermitianOperator, QuantumState, joint_eigenbasis
from csl_lab.noise import (
    NoiseTrajectory,
    SeededRng,
    raw_measure_log_weight,
    sample_physical_noise_step,
    time_average,
)


def log_weight_oracle(n_steps, n_channels, lam, dt):
    """Product of per-sample Gaussian normalizations, accumulated one by one."""
    total = 0.0
    for _ in range(n_steps):
        for _ in range(n_channels):
            total += -0.5 * math.log(2.0 * math.pi * lam / dt)
    return total


def two_level_basis(a1=1.0, a2=-1.0):
    return joint_eigenbasis([HermitianOperator(np.diag([a1, a2]))])


class TestSeededRng:
    def test_bitwise_replay(self):
        a = SeededRng(123, 45).standard_normal(16)
        b = SeededRng(123, 45).standard_normal(16)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = SeededRng(123, 0).standard_normal(16)
        b = SeededRng(123, 1).standard_normal(16)
        assert not np.array_equal(a, b)


class TestMeasureLogWeight:
    def test_unit_normalization(self):
        traj = NoiseTrajectory(dt=1.0, samples=np.zeros((1, 1)))
        lam = 1.0 / (2.0 * math.pi)
        assert raw_measure_log_weight(traj, lam) == pytest.approx(0.0, abs=1e-15)

    def test_additivity_in_steps(self):
        one = NoiseTrajectory(dt=0.1, samples=np.zeros((5, 2)))
        two = NoiseTrajectory(dt=0.1, samples=np.zeros((10, 2)))
        assert raw_measure_log_weight(two, 0.7) == pytest.approx(
            2.0 * raw_measure_log_weight(one, 0.7), rel=1e-14
        )

    @pytest.mark.parametrize("n_steps,n_channels,lam,dt", [(7, 3, 0.4, 0.01), (1, 1, 2.0, 0.5)])
    def test_matches_product_oracle(self, n_steps, n_channels, lam, dt):
        traj = NoiseTrajectory(dt=dt, samples=np.ones((n_steps, n_channels)))
        want = log_weight_oracle(n_steps, n_channels, lam, dt)
        assert raw_measure_log_weight(traj, lam) == pytest.approx(want, rel=1e-12)

    def test_requires_positive_rate(self):
        traj = NoiseTrajectory(dt=0.1, samples=np.zeros((1, 1)))
        with pytest.raises(ValueError):
            raw_measure_log_weight(traj, 0.0)


class TestTimeAverage:
    def test_constant(self):
        traj = NoiseTrajectory(dt=0.1, samples=np.full((50, 1), 2.4))
        assert time_average(traj, 0) == pytest.approx(2.4, abs=1e-14)

    def test_alternating_cancels(self):
        samples = np.tile([[3.0], [-3.0]], (25, 1))
        traj = NoiseTrajectory(dt=0.1, samples=samples)
        assert time_average(traj, 0) == pytest.approx(0.0, abs=1e-14)

    def test_branch_average_converges(self):
        # noise drawn on a fixed eigenstate must average to 2*lam*a1
        lam, dt, a1 = 1.0, 0.02, 1.5
        basis = two_level_basis(a1=a1, a2=-0.5)
        state = QuantumState(np.array([1.0, 0.0], dtype=complex), normalized=True)
        rng = SeededRng(5, 0)
        n_steps = 20_000
        samples = np.empty((n_steps, 1))
        for k in range(n_steps):
            w, _ = sample_physical_noise_step(state, basis, lam, dt, rng)
            samples[k] = w
        traj = NoiseTrajectory(dt=dt, samples=samples)
        total_t = n_steps * dt
        assert abs(time_average(traj, 0) - 2.0 * lam * a1) < 4.0 * math.sqrt(lam / total_t)

    def test_channel_range(self):
        traj = NoiseTrajectory(dt=0.1, samples=np.zeros((3, 2)))
        with pytest.raises(ValueError, match="channel"):
            time_average(traj, 2)


class TestPhysicalNoiseSampling:
    def test_eigenstate_gaussian_moments(self):
        lam, dt, a1 = 0.8, 0.05, 2.0
        basis = two_level_basis(a1=a1, a2=-1.0)
        state = QuantumState(np.array([1.0, 0.0], dtype=complex), normalized=True)
        rng = SeededRng(11, 0)
        n = 100_000
        draws = np.empty(n)
        for k in range(n):
            w, branch = sample_physical_noise_step(state, basis, lam, dt, rng)
            draws[k] = w[0]
        sigma_sq = lam / dt
        mean_se = math.sqrt(sigma_sq / n)
        var_se = sigma_sq * math.sqrt(2.0 / (n - 1))
        assert abs(draws.mean() - 2.0 * lam * a1) < 4.0 * mean_se
        assert abs(draws.var(ddof=1) - sigma_sq) < 4.0 * var_se

    def test_branch_frequencies_born(self):
        basis = two_level_basis()
        state = QuantumState(np.sqrt([0.6, 0.4]).astype(complex), normalized=True)
        rng = SeededRng(21, 0)
        n = 10_000
        hits = 0
        # ascending eigenvalues: branch 1 carries a=+1, Born weight 0.6
        for _ in range(n):
            _, branch = sample_physical_noise_step(state, basis, 1.0, 0.1, rng)
            hits += branch == 1
        se = math.sqrt(0.6 * 0.4 / n)
        assert abs(hits / n - 0.6) < 4.0 * se

    def test_branch_chisquare(self):
        op = HermitianOperator(np.diag([1.0, 2.0, 3.0]))
        basis = joint_eigenbasis([op])
        weights = np.array([0.5, 0.3, 0.2])
        state = QuantumState(np.sqrt(weights).astype(complex), normalized=True)
        rng = SeededRng(31, 0)
        n = 10_000
        counts = np.zeros(3, dtype=int)
        for _ in range(n):
            _, branch = sample_physical_noise_step(state, basis, 1.0, 0.1, rng)
            counts[branch] += 1
        assert stats.chisquare(counts, f_exp=weights * n).pvalue > 0.001

    def test_degenerate_marginal_independent_of_amplitudes(self):
        # identical eigenvalues: the w marginal is one Gaussian, whatever the state
        basis = joint_eigenbasis([HermitianOperator(np.diag([1.3, 1.3]))])
        lam, dt, n = 1.0, 0.1, 40_000

        def moments(amps, stream):
            state = QuantumState(np.asarray(amps, dtype=complex), normalized=True)
            rng = SeededRng(77, stream)
            draws = np.array(
                [sample_physical_noise_step(state, basis, lam, dt, rng)[0][0] for _ in range(n)]
            )
            return draws.mean(), draws.var(ddof=1)

        m1, v1 = moments([1.0, 0.0], 0)
        m2, v2 = moments(np.sqrt([0.5, 0.5]), 1)
        sigma_sq = lam / dt
        mean_se = math.sqrt(sigma_sq / n)
        assert abs(m1 - 2.0 * lam * 1.3) < 4.0 * mean_se
        assert abs(m2 - 2.0 * lam * 1.3) < 4.0 * mean_se
        assert abs(m1 - m2) < 6.0 * mean_se
        assert abs(v1 - v2) < 6.0 * sigma_sq * math.sqrt(2.0 / n)

    def test_requires_normalized_state(self):
        basis = two_level_basis()
        state = QuantumState(np.array([1.0, 1.0], dtype=complex))
        with pytest.raises(ValueError, match="normalized"):
            sample_physical_noise_step(state, basis, 1.0, 0.1, SeededRng(1, 0))

    def test_requires_positive_rate(self):
        basis = two_level_basis()
        state = QuantumState(np.array([1.0, 0.0], dtype=complex), normalized=True)
        with pytest.raises(ValueError, match="lam"):
            sample_physical_noise_step(state, basis, 0.0, 0.1, SeededRng(1, 0))


class TestNoiseTrajectory:
    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseTrajectory(dt=0.0, samples=np.zeros((1, 1)))
        with pytest.raises(ValueError):
            NoiseTrajectory(dt=0.1, samples=np.array([[np.inf]]))

    def test_csv_round_trip(self, tmp_path):
        samples = np.array([[1.5, -2.0], [0.25, 4.0]])
        traj = NoiseTrajectory(dt=0.5, samples=samples)
        path = tmp_path / "noise.csv"
        traj.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,time,channel,w"
        assert len(lines) == 1 + 4
        got = np.array([float(line.split(",")[3]) for line in lines[1:]])
        assert np.array_equal(got, samples.ravel())
