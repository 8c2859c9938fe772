"""Built-in acceptance suite: one check per release criterion.

Each criterion runs at its pinned tolerance and reports a single pass/fail
line; `csl-lab check` and the test suite share this implementation.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants
from .cosmogenesis import CosmoParams, mean_n_csl, mean_n_numerical, mean_n_schrodinger, moment_ode_oracle
from .csl_dynamics import CslModel, run_ensemble
from .energy_ledger import track_ledger
from .experiments import ExperimentConfig, run_experiment, _fixed_hermitian
from .gamblers_ruin import quantum_ruin_ensemble
from .hilbert import DensityMatrix, HermitianOperator, QuantumState
from .lattice_csl import (
    LatticeConfig,
    build_master_model,
    energy_gain_rate,
    gaussian_wavepacket,
    kinetic_hamiltonian,
    numerical_energy_gain,
)
from .master_eq import LindbladModel, analytic_offdiag, integrate_master

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "format_result"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float


def format_result(result: CriterionResult) -> str:
    status = "PASS" if result.passed else "FAIL"
    return (
        f"{status}  criterion {result.number:2d}  {result.title}"
        f"  [{result.seconds:.1f}s]  {result.detail}"
    )


def _criterion_1_born_statistics(seed: int) -> tuple[bool, str]:
    start = time.perf_counter()
    freq, summary = quantum_ruin_ensemble(
        p1=0.6, eigenvalues=(1.0, -1.0), lam=1.0, dt=0.0125, t_final=8.0,
        n_traj=10_000, seed=seed, n_workers=1,
    )
    elapsed = time.perf_counter() - start
    ok = abs(freq - 0.6) < 0.015 and elapsed < 30.0
    return ok, (
        f"outcome-1 frequency {freq:.4f} in 0.6 +- 0.015 over 10^4 trajectories, "
        f"{summary.unresolved} unresolved, {elapsed:.1f}s < 30s"
    )


def _criterion_2_offdiag_decay(seed: int) -> tuple[bool, str]:
    p1, lam, dt, t_final, n_traj = 0.6, 1.0, 0.005, 1.0, 10_000
    amps = np.array([math.sqrt(p1), math.sqrt(1 - p1)], dtype=np.complex128)
    initial = QuantumState(amps, normalized=True)
    op = HermitianOperator(np.diag([1.0, -1.0]))
    n_steps = int(round(t_final / dt))
    steps = [k * (n_steps // 10) for k in range(11)]
    model = CslModel(None, [op], lam=lam, dt=dt, n_steps=n_steps)
    summary = run_ensemble(initial, model, n_traj, seed, checkpoints=steps, n_workers=1)
    times = summary.checkpoint_times[1:]
    mc = np.array([abs(summary.rho_mean[c][0, 1]) for c in range(1, 11)])
    se = np.array([summary.rho_se[c][0, 1] for c in range(1, 11)])
    ana = np.array(
        [abs(analytic_offdiag(amps[0], amps[1], 1.0, -1.0, lam, t)) for t in times]
    )
    mc_ok = bool(np.all(np.abs(mc - ana) <= 5.0 * se + 1e-12))

    lmodel = LindbladModel(None, [op], lam)
    master = integrate_master(
        DensityMatrix.from_state(initial), lmodel, t_final, 0.002,
        record_times=list(times),
    )
    rel = np.array(
        [
            abs(abs(rho.matrix[0, 1]) - a) / a
            for rho, a in zip(master.matrices, ana)
        ]
    )
    master_ok = bool(np.max(rel) <= 1e-8)
    mc_margin = float(np.max(np.abs(mc - ana) / se))
    return mc_ok and master_ok, (
        f"MC within 5 SE at 10 checkpoints (worst {mc_margin:.2f} SE); "
        f"integrator max rel err {np.max(rel):.2e} <= 1e-8"
    )


def _criterion_3_unraveling_equivalence(seed: int) -> tuple[bool, str]:
    lam, dt, t_final, n_traj = 1.0, 0.001, 1.0, 10_000
    a1 = HermitianOperator(np.diag([0.0, 0.0, 1.0, 1.0]))
    a2 = HermitianOperator(np.diag([0.0, 1.0, 0.0, 1.0]))
    h = _fixed_hermitian(4, 1.0, 7)
    initial = QuantumState(np.full(4, 0.5, dtype=np.complex128), normalized=True)
    n_steps = int(round(t_final / dt))
    steps = [k * (n_steps // 5) for k in range(6)]
    model = CslModel(h, [a1, a2], lam=lam, dt=dt, n_steps=n_steps)
    summary = run_ensemble(initial, model, n_traj, seed, checkpoints=steps, n_workers=1)
    master = integrate_master(
        DensityMatrix.from_state(initial), LindbladModel(h, [a1, a2], lam),
        t_final, dt, record_times=list(summary.checkpoint_times),
    )
    worst = 0.0
    ok = True
    for c in range(len(steps)):
        dev = np.abs(summary.rho_mean[c] - master.matrices[c].matrix)
        allowed = 5.0 * summary.rho_se[c] + 1e-10
        ok &= bool(np.all(dev <= allowed))
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(dev > 0, dev / allowed, 0.0)
        worst = max(worst, float(np.nanmax(ratio)))
    return ok, (
        f"4-dim model with H != 0: entrywise |MC - master| within 5 SE "
        f"at 6 checkpoints (worst fraction {worst:.2f})"
    )


def _criterion_4_cosmo_analytic(seed: int) -> tuple[bool, str]:
    del seed
    lams = [0.05, 0.3, 1.0, 3.0, 10.0]
    times = [1.0, 3.0, 7.0, 12.0, 20.0]
    worst = 0.0
    for lam in lams:
        params = CosmoParams(m=1.0, g=0.2, V=3, lam=lam, T=max(times))
        _, oracle = moment_ode_oracle(params, record_times=times)
        for t, n_or in zip(times, oracle):
            ana = mean_n_csl(params.at_time(t))
            worst = max(worst, abs(n_or - ana) / abs(ana))
    grid_ok = worst <= 1e-8

    limit_worst = 0.0
    for t in times:
        a = mean_n_csl(CosmoParams(m=1.0, g=0.2, V=3, lam=0.0, T=t))
        b = mean_n_schrodinger(CosmoParams(m=1.0, g=0.2, V=3, lam=0.0, T=t))
        limit_worst = max(limit_worst, abs(a - b) / max(abs(b), 1e-30))
    limit_ok = limit_worst <= 1e-10
    return grid_ok and limit_ok, (
        f"closed form vs moment ODE oracle on 5x5 grid: max rel err {worst:.2e} "
        f"<= 1e-8; lam->0 vs oscillation: {limit_worst:.2e} <= 1e-10"
    )


def _criterion_5_cosmo_numerical(seed: int) -> tuple[bool, str]:
    del seed
    start = time.perf_counter()
    t_grid = [4.0, 8.0, 12.0, 16.0, 20.0]
    worst = 0.0
    for lam in (0.1, 0.5, 2.0):
        params = CosmoParams(m=1.0, g=0.1, V=1, lam=lam, T=20.0, n_max=16)
        times, values = mean_n_numerical(params, record_times=t_grid)
        for t, val in zip(times, values):
            ana = mean_n_csl(params.at_time(t))
            worst = max(worst, abs(val - ana) / abs(ana))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and elapsed < 60.0
    return ok, (
        f"truncated-Fock master equation vs closed form: max rel err {worst:.2e} "
        f"<= 1e-3 for lam in (0.1, 0.5, 2), T <= 20, n_max=16; {elapsed:.1f}s < 60s"
    )


def _criterion_6_zeno_limit(seed: int) -> tuple[bool, str]:
    del seed
    m, g, T = 1.0, 0.25, 4.0
    lams = m * np.logspace(1.0, 3.0, 21)
    nbar = np.array(
        [mean_n_csl(CosmoParams(m=m, g=g, V=1, lam=lam, T=T)) for lam in lams]
    )
    monotone = bool(np.all(np.diff(nbar) < 0.0))
    ratio = mean_n_csl(CosmoParams(m=m, g=g, V=1, lam=1000.0 * m, T=T)) / mean_n_csl(
        CosmoParams(m=m, g=g, V=1, lam=m, T=T)
    )
    ok = monotone and ratio < 0.01
    return ok, (
        f"n(T; lam) strictly decreasing on 21 points with lam > 10 m; "
        f"n(1000 m)/n(m) = {ratio:.4f} < 0.01"
    )


def _criterion_7_constants(seed: int) -> tuple[bool, str]:
    del seed
    rate = energy_gain_rate(
        constants.PROTON_MASS,
        lam=constants.GRW_COLLAPSE_RATE,
        a=constants.GRW_SMEARING_LENGTH,
        m0=constants.PROTON_MASS,
        hbar=constants.HBAR,
        n_axes=3,
    )
    ratio = rate * constants.AGE_OF_UNIVERSE / (
        constants.PROTON_MASS * constants.SPEED_OF_LIGHT**2
    )
    ok = 1e-16 / 3.0 <= ratio <= 3.0 * 1e-16
    return ok, (
        f"E/mc^2 over 4.3e17 s = {ratio:.3e}, within a factor 3 of 1e-16 "
        f"(rate {rate:.3e} W)"
    )


def _criterion_8_numerical_energy_gain(seed: int) -> tuple[bool, str]:
    del seed
    lam_values = np.array([0.5, 1.0, 1.5, 2.0])
    slopes = []
    for lam in lam_values:
        config = LatticeConfig(
            n_sites=48, n_axes=1, spacing=1.0 / 6.0, smearing_a=1.0,
            lam=float(lam), m0=1.0, particle_masses=(1.0,),
        )
        packet = gaussian_wavepacket(config, config.n_sites // 2, 1.0)
        slopes.append(numerical_energy_gain(config, packet, 1.0).slope)
    slopes = np.array(slopes)
    predicted = np.array(
        [energy_gain_rate(1.0, float(lam), 1.0, 1.0, hbar=1.0, n_axes=1) for lam in lam_values]
    )
    coef = float(np.sum(slopes * lam_values) / np.sum(lam_values**2))
    linear_dev = float(np.max(np.abs(slopes - coef * lam_values) / slopes))
    rate_err = float(np.max(np.abs(slopes / predicted - 1.0)))
    ok = linear_dev < 0.02 and rate_err < 0.10
    return ok, (
        f"1-d lattice: slope linear in lam (fit deviation {linear_dev:.3%} < 2%) "
        f"and within {rate_err:.2%} of the 1-d analytic rate (< 10%)"
    )


def _criterion_9_ledger_conservation(seed: int) -> tuple[bool, str]:
    del seed
    config = LatticeConfig(
        n_sites=32, n_axes=1, spacing=0.25, smearing_a=1.0, lam=1.0,
        m0=1.0, particle_masses=(1.0,),
    )
    h = kinetic_hamiltonian(config)
    packet = gaussian_wavepacket(config, config.n_sites // 2, 1.0)
    model = build_master_model(config, h)
    series, _ = track_ledger(model, DensityMatrix.from_state(packet), 0.5, record_every=5)
    drift = series.max_conservation_drift()
    gains = np.array([led.particle_energy for led in series.ledgers])
    w_tot = np.array([led.w_field_energy for led in series.ledgers])
    gained = gains - gains[0]
    sign_ok = bool(
        np.all(w_tot[gained >= 0.0] <= 1e-12 * np.maximum(1.0, np.abs(gained[gained >= 0.0])))
    )
    ok = drift <= 1e-9 and sign_ok
    return ok, (
        f"E_particles + E_w constant to {drift:.2e} (<= 1e-9 relative); "
        f"integrated w density <= 0 while cumulative gain >= 0"
    )


def _criterion_10_determinism(seed: int) -> tuple[bool, str]:
    params = {"n_traj": 2000, "t_final": 4.0, "dt": 0.01}
    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        for run_idx, workers in enumerate((1, 4, 16, 4)):
            out = Path(tmp) / f"run{run_idx}_w{workers}"
            report = run_experiment(
                ExperimentConfig(
                    experiment="collapse_ensemble",
                    parameters={**params, "n_workers": workers},
                    seed=seed,
                    output_dir=str(out),
                ),
                figures=False,
            )
            csvs = sorted(
                f["name"] for f in report.manifest["outputs"] if f["kind"] == "csv"
            )
            digests.append(
                tuple((name, (out / name).read_bytes()) for name in csvs)
            )
    identical = all(d == digests[0] for d in digests[1:])
    n_files = len(digests[0])
    return identical, (
        f"{n_files} CSVs byte-identical across parallelism 1, 4, 16 and a "
        f"repeated run (same config and seed)"
    )


CRITERIA = [
    (1, "Born-rule collapse statistics", _criterion_1_born_statistics),
    (2, "Off-diagonal decay", _criterion_2_offdiag_decay),
    (3, "Unraveling equivalence", _criterion_3_unraveling_equivalence),
    (4, "Cosmogenesis analytic", _criterion_4_cosmo_analytic),
    (5, "Cosmogenesis numerical", _criterion_5_cosmo_numerical),
    (6, "Zeno limit", _criterion_6_zeno_limit),
    (7, "Energy-gain constants check", _criterion_7_constants),
    (8, "Numerical energy gain", _criterion_8_numerical_energy_gain),
    (9, "Ledger conservation", _criterion_9_ledger_conservation),
    (10, "Determinism", _criterion_10_determinism),
]


def run_criterion(number: int, seed: int = 20260811) -> CriterionResult:
    for num, title, fn in CRITERIA:
        if num == number:
            start = time.perf_counter()
            passed, detail = fn(seed)
            return CriterionResult(num, title, passed, detail, time.perf_counter() - start)
    raise ValueError(f"no criterion {number}")


def run_all(numbers=None, seed: int = 20260811, verbose: bool = True):
    results = []
    for num, _title, _fn in CRITERIA:
        if numbers and num not in numbers:
            continue
        result = run_criterion(num, seed)
        results.append(result)
        if verbose:
            print(format_result(result))
    return results
