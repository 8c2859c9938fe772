import math

import numpy as np
import pytest

from csl_lab import constants
from csl_lab.hilbert import DensityMatrix
from csl_lab.lattice_csl import (
    LatticeConfig,
    ResolutionError,
    build_master_model,
    density_operators,
    energy_gain_rate,
    fit_energy_slope,
    gaussian_wavepacket,
    kinetic_hamiltonian,
    numerical_energy_gain,
    smeared_mass_density,
)

# independent constants arithmetic, frozen (CODATA 2018 inputs)
RATE_SI_PROTON = 4.986729374369959e-44  # W, 3 hbar^2 lam m / (2 m0 a)^2
RATIO_OVER_MC2 = 1.4264122662226214e-16  # rate * 4.3e17 s / (m c^2)


def coherence_decay_oracle(config, rho0, h_op, times):
    """Closed-form energy trajectory for the periodic 1-d lattice.

    The kinetic energy is 2*kappa*(1 - Re C(s)) with C(s) the one-site
    coherence sum; the unitary part commutes with lattice translations and
    every site channel damps C(s) at the uniform rate
    D(s) = (lam_eff/2) * sum_x (g_x(z) - g_x(z-s))^2, so
    E(t) = 2*kappa - (2*kappa - E0) * exp(-D(s) t) exactly.
    """
    n = config.n_sites
    kappa = config.hbar**2 / (2.0 * config.particle_masses[0] * config.spacing**2)
    profiles = np.stack(
        [np.diagonal(op.matrix).real for op in density_operators(config)]
    )
    lam_eff = config.lam * config.spacing
    d_s = 0.5 * lam_eff * float(np.sum((profiles[:, 0] - profiles[:, 1]) ** 2))
    c_s = sum(rho0[j, (j - 1) % n] for j in range(n))
    e0 = float(np.trace(h_op.matrix @ rho0).real)
    assert abs((2 * kappa - 2 * kappa * c_s.real) - e0) < 1e-9 * max(1.0, abs(e0))
    return 2 * kappa - (2 * kappa - e0) * np.exp(-d_s * np.asarray(times))


def make_config(lam=1.0, n_sites=48, spacing=1.0 / 6.0, mass=1.0, **kw):
    return LatticeConfig(
        n_sites=n_sites, n_axes=1, spacing=spacing, smearing_a=1.0,
        lam=lam, m0=1.0, particle_masses=(mass,), **kw,
    )


class TestSmearedMassDensity:
    @pytest.mark.parametrize("n_axes,peak", [(1, math.pi**-0.25), (2, math.pi**-0.5), (3, math.pi**-0.75)])
    def test_peak_value(self, n_axes, peak):
        # eigenvalue at the particle's own position is (pi a^2)^(-d/4) for m=m0
        config = LatticeConfig(
            n_sites=5, n_axes=n_axes, spacing=0.25, smearing_a=1.0,
            lam=1.0, m0=1.0, particle_masses=(1.0,),
        )
        op = smeared_mass_density(config, 0)
        assert op.matrix[0, 0].real == pytest.approx(peak, rel=1e-12)

    def test_two_particles_additive(self):
        base = LatticeConfig(
            n_sites=8, n_axes=1, spacing=0.25, smearing_a=1.0,
            lam=1.0, m0=1.0, particle_masses=(1.0,),
        )
        pair = LatticeConfig(
            n_sites=8, n_axes=1, spacing=0.25, smearing_a=1.0,
            lam=1.0, m0=1.0, particle_masses=(1.0, 2.0),
        )
        x = 3
        single_1 = np.diagonal(smeared_mass_density(base, x).matrix).real
        heavy = LatticeConfig(
            n_sites=8, n_axes=1, spacing=0.25, smearing_a=1.0,
            lam=1.0, m0=1.0, particle_masses=(2.0,),
        )
        single_2 = np.diagonal(smeared_mass_density(heavy, x).matrix).real
        both = np.diagonal(smeared_mass_density(pair, x).matrix).real.reshape(8, 8)
        want = single_1[:, None] + single_2[None, :]
        assert np.abs(both - want).max() < 1e-14

    def test_half_width(self):
        # peak halves at distance a*sqrt(2 ln 2); place the probe on the grid
        half_dist = math.sqrt(2.0 * math.log(2.0))  # = 1.1774100225154747 * a
        spacing = half_dist / 8.0
        config = LatticeConfig(
            n_sites=64, n_axes=1, spacing=spacing, smearing_a=1.0,
            lam=1.0, m0=1.0, particle_masses=(1.0,),
        )
        op = smeared_mass_density(config, 0)
        vals = np.diagonal(op.matrix).real
        assert vals[8] == pytest.approx(0.5 * vals[0], rel=1e-12)

    def test_all_nonnegative_and_commuting(self):
        config = make_config(n_sites=10, spacing=0.25)
        ops = density_operators(config)
        for op in ops:
            vals = np.diagonal(op.matrix).real
            assert np.all(vals >= 0.0)
            assert np.abs(op.matrix - np.diag(vals)).max() == 0.0

    def test_translation_equivariance(self):
        config = make_config(n_sites=12, spacing=0.25)
        shift = 5
        prof_0 = np.diagonal(smeared_mass_density(config, 0).matrix).real
        prof_s = np.diagonal(smeared_mass_density(config, shift).matrix).real
        assert np.abs(np.roll(prof_0, shift) - prof_s).max() < 1e-14

    def test_invalid_site(self):
        config = make_config(n_sites=6, spacing=0.25)
        with pytest.raises(ValueError, match="site"):
            smeared_mass_density(config, 6)


class TestEnergyGainRate:
    def test_zero_rate(self):
        assert energy_gain_rate(1.0, lam=0.0, a=1.0, m0=1.0, hbar=1.0) == 0.0

    def test_si_value_frozen(self):
        rate = energy_gain_rate(
            constants.PROTON_MASS,
            lam=constants.GRW_COLLAPSE_RATE,
            a=constants.GRW_SMEARING_LENGTH,
            m0=constants.PROTON_MASS,
            hbar=constants.HBAR,
            n_axes=3,
        )
        assert rate == pytest.approx(RATE_SI_PROTON, rel=1e-10)

    def test_cosmic_ratio_order_of_magnitude(self):
        rate = energy_gain_rate(constants.PROTON_MASS)
        ratio = rate * constants.AGE_OF_UNIVERSE / (
            constants.PROTON_MASS * constants.SPEED_OF_LIGHT**2
        )
        assert ratio == pytest.approx(RATIO_OVER_MC2, rel=1e-10)
        assert 1e-16 / 3 <= ratio <= 3e-16

    def test_linear_in_mass_and_rate(self):
        base = energy_gain_rate(1.0, lam=1.0, a=1.0, m0=1.0, hbar=1.0)
        assert energy_gain_rate(3.0, lam=1.0, a=1.0, m0=1.0, hbar=1.0) == pytest.approx(3 * base)
        assert energy_gain_rate(1.0, lam=2.5, a=1.0, m0=1.0, hbar=1.0) == pytest.approx(2.5 * base)


class TestKineticHamiltonian:
    def test_spectrum(self):
        config = make_config(n_sites=16, spacing=0.5)
        h = kinetic_hamiltonian(config)
        kappa = 1.0 / (2.0 * 1.0 * 0.5**2)
        k = 2.0 * math.pi * np.arange(16) / 16.0
        want = np.sort(2.0 * kappa * (1.0 - np.cos(k)))
        assert np.abs(h.eigenvalues - want).max() < 1e-10


class TestNumericalEnergyGain:
    def test_free_particle_energy_constant(self):
        config = make_config(lam=0.0, n_sites=24)
        packet = gaussian_wavepacket(config, 12, 0.8)
        result = numerical_energy_gain(config, packet, 0.5)
        drift = np.abs(result.energies - result.energies[0]).max()
        assert drift < 1e-9 * max(1.0, abs(result.energies[0]))

    def test_matches_coherence_decay_oracle(self):
        config = make_config(lam=1.5, n_sites=36)
        packet = gaussian_wavepacket(config, 18, 1.0)
        rho0 = np.outer(packet.amplitudes, packet.amplitudes.conj())
        h_op = kinetic_hamiltonian(config)
        result = numerical_energy_gain(config, packet, 1.0, dt=5e-4)
        want = coherence_decay_oracle(config, rho0, h_op, result.times)
        rel = np.abs(result.energies - want) / np.abs(want).max()
        assert rel.max() < 1e-6

    def test_slope_matches_1d_rate(self):
        config = make_config(lam=1.0)
        packet = gaussian_wavepacket(config, 24, 1.0)
        result = numerical_energy_gain(config, packet, 1.0)
        rate = energy_gain_rate(1.0, lam=1.0, a=1.0, m0=1.0, hbar=1.0, n_axes=1)
        assert abs(result.slope / rate - 1.0) < 0.10

    def test_slope_width_independent(self):
        slopes = []
        for width in (0.75, 1.25):
            config = make_config(lam=1.0)
            packet = gaussian_wavepacket(config, 24, width)
            slopes.append(numerical_energy_gain(config, packet, 1.0).slope)
        assert abs(slopes[0] / slopes[1] - 1.0) < 0.05

    def test_slope_linear_in_mass(self):
        masses = np.array([0.5, 1.0, 2.0])
        slopes = []
        for mass in masses:
            config = make_config(lam=1.0, n_sites=36, mass=float(mass))
            packet = gaussian_wavepacket(config, 18, 1.0)
            slopes.append(numerical_energy_gain(config, packet, 0.75).slope)
        slopes = np.asarray(slopes)
        coef = float(np.sum(slopes * masses) / np.sum(masses**2))
        assert np.max(np.abs(slopes - coef * masses) / slopes) < 0.02

    def test_resolution_guard(self):
        config = make_config(spacing=0.3)
        packet_config = make_config(spacing=0.25)
        packet = gaussian_wavepacket(packet_config, 24, 1.0)
        with pytest.raises(ResolutionError):
            numerical_energy_gain(config, packet, 0.1)

    def test_csv_output(self, tmp_path):
        config = make_config(lam=0.5, n_sites=24)
        packet = gaussian_wavepacket(config, 12, 0.8)
        result = numerical_energy_gain(config, packet, 0.2)
        path = tmp_path / "energy.csv"
        result.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "time,energy"
        assert len(lines) == 1 + len(result.times)


class TestBuildMasterModel:
    def test_volume_element_absorbed(self):
        config = make_config(lam=2.0, n_sites=12, spacing=0.25)
        model = build_master_model(config, None)
        assert model.lam == pytest.approx(2.0 * 0.25)
        assert len(model.collapse_ops) == 12

    def test_fit_energy_slope_exact_line(self):
        t = np.linspace(0.0, 1.0, 11)
        assert fit_energy_slope(t, 3.0 * t + 0.5) == pytest.approx(3.0, rel=1e-12)
