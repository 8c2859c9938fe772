"""Smeared mass-density collapse operators on a spatial lattice.

The physical collapse channel at lattice site x is the mass density
smeared with a Gaussian of width ``a`` and normalized by a reference mass
``m0``.  For first-quantized states of a fixed number of particles the
channel is diagonal in the position-configuration basis: its eigenvalue on
a configuration ``(z_1, ..., z_P)`` is

    sum_p (m_p/m0) * (pi a^2)^(-d/4) * exp(-|x - z_p|^2 / (2 a^2))

with d the number of axes (the d = 3 normalization is the conventional
one; lower d keeps the same double-commutator structure on much smaller
state spaces).  Distances wrap around the box (minimal image), which makes
the channel family exactly translation covariant.

The continuum channel sum is an integral over x; on the lattice it is
approximated by a site sum carrying the volume element, which is absorbed
here into the model rate: ``lam_model = lam * spacing^d``.

Everything is expressed in one consistent unit system chosen by the
caller.  The default ``hbar=1`` gives model units (the physical GRW rate
is numerically invisible at desk scale, and the master equation is linear
in the rate, so results rescale exactly); SI callers pass the pinned
constants instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import constants
from .csvio import write_csv
from .hilbert import DensityMatrix, HermitianOperator, QuantumState
from .master_eq import (
    STEP_RULE_LIMIT,
    LindbladModel,
    MasterTrajectory,
    integrate_master,
)

__all__ = [
    "LatticeConfig",
    "ResolutionError",
    "smeared_mass_density",
    "density_operators",
    "kinetic_hamiltonian",
    "gaussian_wavepacket",
    "build_master_model",
    "energy_gain_rate",
    "numerical_energy_gain",
    "EnergyGainResult",
    "fit_energy_slope",
]


class ResolutionError(ValueError):
    """Lattice spacing too coarse to resolve the smearing length."""


@dataclass(frozen=True)
class LatticeConfig:
    """Periodic lattice with smeared-mass-density collapse channels.

    ``n_sites`` counts sites per axis; ``particle_masses`` fixes the
    (distinguishable) particle content.  All values share one unit system;
    ``hbar`` defaults to 1 (model units).
    """

    n_sites: int
    n_axes: int = 1
    spacing: float = 1.0
    smearing_a: float = 1.0
    lam: float = 1.0
    m0: float = 1.0
    particle_masses: tuple[float, ...] = (1.0,)
    hbar: float = 1.0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least 2 sites per axis")
        if self.n_axes not in (1, 2, 3):
            raise ValueError("n_axes must be 1, 2 or 3")
        if not (self.spacing > 0.0 and self.smearing_a > 0.0):
            raise ValueError("spacing and smearing length must be positive")
        if self.lam < 0.0 or self.m0 <= 0.0 or self.hbar <= 0.0:
            raise ValueError("lam must be >= 0; m0 and hbar positive")
        masses = tuple(float(m) for m in self.particle_masses)
        if not masses or any(m <= 0.0 for m in masses):
            raise ValueError("particle masses must be positive")
        object.__setattr__(self, "particle_masses", masses)

    @property
    def n_cells(self) -> int:
        return self.n_sites**self.n_axes

    @property
    def n_particles(self) -> int:
        return len(self.particle_masses)

    @property
    def n_configs(self) -> int:
        return self.n_cells**self.n_particles

    @property
    def box_length(self) -> float:
        return self.n_sites * self.spacing

    def site_coords(self) -> np.ndarray:
        """(n_cells, n_axes) coordinates, row-major over axes."""
        axes = [np.arange(self.n_sites) * self.spacing] * self.n_axes
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def wrapped_delta(self, delta: np.ndarray) -> np.ndarray:
        """Minimal-image displacement per axis on the periodic box."""
        box = self.box_length
        return (delta + 0.5 * box) % box - 0.5 * box


def _single_particle_profile(config: LatticeConfig, site_index: int, mass: float) -> np.ndarray:
    coords = config.site_coords()
    delta = config.wrapped_delta(coords - coords[site_index])
    dist_sq = np.sum(delta * delta, axis=1)
    a_sq = config.smearing_a**2
    norm = (math.pi * a_sq) ** (-config.n_axes / 4.0)
    return (mass / config.m0) * norm * np.exp(-dist_sq / (2.0 * a_sq))


def smeared_mass_density(config: LatticeConfig, site_index: int) -> HermitianOperator:
    """Smeared mass-density channel centered on one lattice site.

    Diagonal in the position-configuration basis with non-negative
    eigenvalues; for several particles the eigenvalue is the sum of the
    per-particle Gaussian profiles.
    """
    if not 0 <= site_index < config.n_cells:
        raise ValueError(f"site index {site_index} out of range")
    shape = (config.n_cells,) * config.n_particles
    values = np.zeros(shape)
    for p, mass in enumerate(config.particle_masses):
        profile = _single_particle_profile(config, site_index, mass)
        expand = [None] * config.n_particles
        expand[p] = slice(None)
        values = values + profile[tuple(expand)]
    return HermitianOperator(np.diag(values.ravel()))


def density_operators(config: LatticeConfig) -> list[HermitianOperator]:
    """One smeared mass-density channel per lattice site."""
    return [smeared_mass_density(config, x) for x in range(config.n_cells)]


def kinetic_hamiltonian(config: LatticeConfig) -> HermitianOperator:
    """Free-particle hopping Hamiltonian on the periodic lattice.

    Standard finite-difference kinetic energy: on-site ``2*kappa`` per
    axis and ``-kappa`` hopping to each neighbor, ``kappa =
    hbar^2/(2 m spacing^2)``.  Single-particle only.
    """
    if config.n_particles != 1:
        raise ValueError("kinetic Hamiltonian implemented for a single particle")
    mass = config.particle_masses[0]
    kappa = config.hbar**2 / (2.0 * mass * config.spacing**2)
    n = config.n_sites
    cells = config.n_cells
    h = np.zeros((cells, cells))
    # cell index -> per-axis indices, row-major as in site_coords
    strides = [n ** (config.n_axes - 1 - ax) for ax in range(config.n_axes)]
    for c in range(cells):
        h[c, c] += 2.0 * kappa * config.n_axes
        rem = c
        coords = []
        for stride in strides:
            coords.append(rem // stride)
            rem %= stride
        for ax, stride in enumerate(strides):
            for shift in (-1, 1):
                nb = c + ((coords[ax] + shift) % n - coords[ax]) * stride
                h[c, nb] += -kappa
    return HermitianOperator(h)


def gaussian_wavepacket(
    config: LatticeConfig, center_index: int, width: float, momentum: float = 0.0
) -> QuantumState:
    """Normalized single-particle Gaussian packet (1-d only for momentum)."""
    if config.n_particles != 1:
        raise ValueError("wavepacket helper is single-particle")
    coords = config.site_coords()
    delta = config.wrapped_delta(coords - coords[center_index])
    dist_sq = np.sum(delta * delta, axis=1)
    psi = np.exp(-dist_sq / (4.0 * width**2)).astype(np.complex128)
    if momentum != 0.0:
        psi *= np.exp(1j * momentum * delta[:, 0] / config.hbar)
    return QuantumState(psi / np.linalg.norm(psi), normalized=True)


def build_master_model(
    config: LatticeConfig, hamiltonian: HermitianOperator | None
) -> LindbladModel:
    """Master-equation model with one channel per site.

    The lattice site sum stands in for the spatial integral over channel
    positions, so the volume element ``spacing^n_axes`` is absorbed into
    the model rate.
    """
    lam_model = config.lam * config.spacing**config.n_axes
    return LindbladModel(hamiltonian, density_operators(config), lam_model)


def energy_gain_rate(
    m: float,
    lam: float = constants.GRW_COLLAPSE_RATE,
    a: float = constants.GRW_SMEARING_LENGTH,
    m0: float = constants.PROTON_MASS,
    hbar: float = constants.HBAR,
    n_axes: int = 3,
) -> float:
    """Mean collapse-induced energy gain rate of a free particle of mass m.

    ``n_axes * hbar^2 * lam * m / (4 m0^2 a^2)``: one quadratic's worth of
    momentum diffusion per axis.  SI defaults give watts; pass model-unit
    values for lattice work.
    """
    if min(m, a, m0, hbar) <= 0.0 or lam < 0.0:
        raise ValueError("masses, lengths and hbar must be positive; lam >= 0")
    return n_axes * hbar**2 * lam * m / (4.0 * m0**2 * a**2)


@dataclass(frozen=True)
class EnergyGainResult:
    times: np.ndarray
    energies: np.ndarray
    trajectory: MasterTrajectory

    @property
    def slope(self) -> float:
        return fit_energy_slope(self.times, self.energies)

    def write_csv(self, path) -> None:
        write_csv(path, ["time", "energy"], list(zip(self.times, self.energies)))


def fit_energy_slope(times, energies) -> float:
    """Least-squares affine fit; returns the slope."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    design = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(design, e, rcond=None)
    return float(coef[0])


def numerical_energy_gain(
    config: LatticeConfig,
    initial: QuantumState,
    t_final: float,
    dt: float | None = None,
    hamiltonian: HermitianOperator | None = None,
) -> EnergyGainResult:
    """Ensemble-average particle energy under the lattice collapse model.

    Integrates the master equation for a free particle with one smeared
    density channel per site and records ``Tr(H rho)`` along the way.
    Requires ``spacing <= smearing_a / 4`` so the packet's momentum content
    is resolved.
    """
    if config.spacing > config.smearing_a / 4.0 + 1e-12:
        raise ResolutionError(
            f"spacing {config.spacing:g} exceeds smearing_a/4 = {config.smearing_a / 4.0:g}"
        )
    h_op = kinetic_hamiltonian(config) if hamiltonian is None else hamiltonian
    model = build_master_model(config, h_op)
    if dt is None:
        dt = 0.99 * STEP_RULE_LIMIT / model.step_rule_scale
    rho0 = np.outer(initial.amplitudes, initial.amplitudes.conj()) / initial.norm_sq
    traj = integrate_master(DensityMatrix(rho0), model, t_final, dt)
    energies = np.array(
        [float(np.trace(h_op.matrix @ rho.matrix).real) for rho in traj.matrices]
    )
    return EnergyGainResult(times=traj.times, energies=energies, trajectory=traj)
