"""Expectation-value energy bookkeeping for collapse dynamics.

Collapse narrows wave functions and pumps energy into particles; the
ledger assigns the negative of every increment of ensemble-average
particle energy to a noise-field energy density pinned at the lattice site
where the increment was produced.  The total (particle plus field) is then
constant by construction, the integrated field energy is non-positive
whenever the cumulative particle gain is non-negative, and density already
deposited at a site never moves: later dynamics only adds or subtracts
locally.

The per-site split of one step's energy change is a modeling choice: the
change is attributed to channels in proportion to their dissipative energy
flux ``-(lam/2) Tr(H [A_k, [A_k, rho]])``, the minimal rule that respects
both the global balance and locality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .csvio import write_csv
from .hilbert import DensityMatrix, HermitianOperator
from .master_eq import STEP_RULE_LIMIT, LindbladModel

__all__ = [
    "EnergyLedger",
    "LedgerSeries",
    "AttributionError",
    "initial_ledger",
    "update_ledger",
    "track_ledger",
]

ATTRIBUTION_TOL = 1e-9


class AttributionError(ValueError):
    """Per-site deltas do not add up to the global particle-energy change."""


@dataclass(frozen=True)
class EnergyLedger:
    """Snapshot of the energy balance at time t.

    ``particle_energy + w_field_energy`` equals the initial total exactly;
    ``w_density`` sums to ``w_field_energy``.
    """

    t: float
    particle_energy: float
    w_field_energy: float
    w_density: np.ndarray

    def __post_init__(self):
        dens = np.array(self.w_density, dtype=np.float64, copy=True)
        dens.setflags(write=False)
        object.__setattr__(self, "w_density", dens)
        total = float(dens.sum())
        scale = max(abs(self.w_field_energy), 1.0)
        if abs(total - self.w_field_energy) > 1e-10 * scale:
            raise ValueError(
                f"w_density sums to {total!r}, ledger says {self.w_field_energy!r}"
            )

    @property
    def total_energy(self) -> float:
        return self.particle_energy + self.w_field_energy

    @property
    def n_sites(self) -> int:
        return self.w_density.size


def initial_ledger(n_sites: int, particle_energy: float, t: float = 0.0) -> EnergyLedger:
    """Fresh ledger: zero field energy everywhere."""
    return EnergyLedger(
        t=t,
        particle_energy=float(particle_energy),
        w_field_energy=0.0,
        w_density=np.zeros(n_sites),
    )


def _energy_of(rho, hamiltonian) -> float:
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    h = hamiltonian.matrix if isinstance(hamiltonian, HermitianOperator) else np.asarray(hamiltonian)
    return float(np.trace(h @ mat).real)


def update_ledger(
    ledger: EnergyLedger,
    rho_new,
    hamiltonian,
    site_energy_deltas,
    t_new: float | None = None,
) -> EnergyLedger:
    """Advance the ledger to a new state.

    ``site_energy_deltas`` is the per-site particle-energy change since the
    previous snapshot; it must sum to the global change within 1e-9 (the
    sub-tolerance residual is spread uniformly so the new ledger is exactly
    self-consistent).  The field density loses exactly what the particles
    gained, site by site.  An all-zero delta vector (no collapse activity)
    leaves the density bitwise untouched: the residual is then pure
    integrator drift and stays in the particle column.
    """
    deltas = np.asarray(site_energy_deltas, dtype=np.float64)
    if deltas.shape != (ledger.n_sites,):
        raise ValueError("site_energy_deltas has the wrong length")
    e_new = _energy_of(rho_new, hamiltonian)
    gain = e_new - ledger.particle_energy
    residual = gain - float(deltas.sum())
    scale = max(1.0, abs(e_new), abs(ledger.particle_energy))
    if abs(residual) > ATTRIBUTION_TOL * scale:
        raise AttributionError(
            f"site deltas sum to {float(deltas.sum())!r} but the particle "
            f"energy changed by {gain!r}"
        )
    t_next = ledger.t if t_new is None else float(t_new)
    if not deltas.any():
        return EnergyLedger(
            t=t_next,
            particle_energy=e_new,
            w_field_energy=ledger.w_field_energy,
            w_density=ledger.w_density,
        )
    deltas = deltas + residual / ledger.n_sites
    density = ledger.w_density - deltas
    return EnergyLedger(
        t=t_next,
        particle_energy=e_new,
        w_field_energy=float(density.sum()),
        w_density=density,
    )


@dataclass(frozen=True)
class LedgerSeries:
    ledgers: list[EnergyLedger]

    @property
    def times(self) -> np.ndarray:
        return np.array([led.t for led in self.ledgers])

    @property
    def final(self) -> EnergyLedger:
        return self.ledgers[-1]

    def max_conservation_drift(self) -> float:
        totals = np.array([led.total_energy for led in self.ledgers])
        scale = max(1.0, float(np.abs(totals).max()))
        return float(np.abs(totals - totals[0]).max() / scale)

    def write_csv(self, path) -> None:
        rows = [
            (
                led.t,
                led.particle_energy,
                led.w_field_energy,
                float(led.w_density.min()),
                float(led.w_density.max()),
            )
            for led in self.ledgers
        ]
        write_csv(
            path,
            ["t", "E_particles", "E_w", "min_site_density", "max_site_density"],
            rows,
        )


def _channel_fluxes(model: LindbladModel, h: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Dissipative energy flux per channel, ``-(lam/2) Tr(H [A,[A,rho]])``."""
    fluxes = np.empty(len(model.collapse_ops))
    half = 0.5 * model.lam
    for k, op in enumerate(model.collapse_ops):
        a = op.matrix
        diag_dev = np.abs(a - np.diag(np.diagonal(a))).max()
        if diag_dev <= 1e-14 * max(np.abs(a).max(), 1e-300):
            f = np.diagonal(a).real
            x = rho * (f[:, None] - f[None, :]) ** 2
        else:
            x = a @ (a @ rho) - 2.0 * (a @ rho @ a) + (rho @ a) @ a
        fluxes[k] = -half * float(np.sum(h * x.T).real)
    return fluxes


def track_ledger(
    model: LindbladModel,
    rho0: DensityMatrix,
    t_final: float,
    dt: float | None = None,
    record_every: int = 10,
    channel_sites: Sequence[int] | None = None,
    n_sites: int | None = None,
    ledger0: EnergyLedger | None = None,
) -> tuple[LedgerSeries, DensityMatrix]:
    """Integrate the master equation while maintaining the energy ledger.

    ``channel_sites`` maps collapse channels to ledger sites (identity by
    default).  Returns the recorded series and the final state; pass the
    previous run's final ledger as ``ledger0`` to continue a ledger across
    phases (e.g. switching collapse off).
    """
    if model.hamiltonian is None:
        raise ValueError("ledger tracking needs a Hamiltonian for Tr(H rho)")
    h = model.hamiltonian.matrix
    n_channels = len(model.collapse_ops)
    if channel_sites is None:
        channel_sites = np.arange(n_channels)
    else:
        channel_sites = np.asarray(channel_sites, dtype=int)
    if n_sites is None:
        n_sites = int(channel_sites.max()) + 1 if n_channels else 1

    if dt is None:
        dt = 0.99 * STEP_RULE_LIMIT / model.step_rule_scale
    n_steps = max(1, int(np.ceil(t_final / dt - 1e-12)))
    step = t_final / n_steps

    rho = rho0.matrix.copy()
    energy = _energy_of(rho, h)
    if ledger0 is None:
        ledger = initial_ledger(n_sites, energy)
    else:
        if ledger0.n_sites != n_sites:
            raise ValueError("ledger0 has the wrong number of sites")
        if abs(ledger0.particle_energy - energy) > 1e-6 * max(1.0, abs(energy)):
            raise ValueError("ledger0 does not match the initial state's energy")
        ledger = ledger0
    t0 = ledger.t
    ledgers = [ledger]

    pending = np.zeros(n_sites)
    for k in range(1, n_steps + 1):
        fluxes = _channel_fluxes(model, h, rho) if model.lam > 0.0 else np.zeros(n_channels)
        rho = model.rk4_step(rho, step)
        e_next = _energy_of(rho, h)
        change = e_next - energy
        total_flux = float(fluxes.sum())
        if abs(total_flux) > 1e-12 * max(1.0, abs(change)):
            per_channel = change * fluxes / total_flux
            np.add.at(pending, channel_sites, per_channel)
        # else: no dissipative activity; the residual integrator drift is
        # absorbed by update_ledger's uniform spread (and must stay < 1e-9)
        energy = e_next
        if k % record_every == 0 or k == n_steps:
            ledger = update_ledger(ledger, rho, h, pending, t_new=t0 + k * step)
            ledgers.append(ledger)
            pending = np.zeros(n_sites)

    return LedgerSeries(ledgers), DensityMatrix(rho)
