"""Named experiments binding the library into reproducible batch runs.

Each experiment has documented defaults, writes CSV time series plus a
JSON manifest (config echo, seed, file list, built-in check results, wall
time) into its output directory, and renders report figures alongside the
delimited output.  Same config and seed give byte-identical CSVs at any
parallelism level.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from . import constants, plotting
from .cosmogenesis import CosmoParams, mean_n_csl, mean_n_numerical, moment_ode_oracle
from .csl_dynamics import CslModel, run_ensemble, sample_trajectory
from .csvio import csv_to_plot_data, write_csv, write_json
from .energy_ledger import LedgerSeries, track_ledger
from .gamblers_ruin import play_ruin_games, quantum_ruin_ensemble
from .hilbert import DensityMatrix, HermitianOperator, QuantumState
from .lattice_csl import (
    LatticeConfig,
    build_master_model,
    energy_gain_rate,
    fit_energy_slope,
    gaussian_wavepacket,
    kinetic_hamiltonian,
    numerical_energy_gain,
)
from .master_eq import LindbladModel, analytic_offdiag, integrate_master
from .noise import SeededRng

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExitReport",
    "run_experiment",
    "experiment_names",
    "describe_experiments",
]


@dataclass(frozen=True)
class Param:
    default: object
    doc: str


@dataclass(frozen=True)
class Experiment:
    name: str
    summary: str
    params: dict[str, Param]
    runner: Callable[["RunContext"], None]


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    seed: int = 1
    output_dir: str | None = None


@dataclass(frozen=True)
class ExitReport:
    experiment: str
    output_dir: Path
    manifest: dict

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.manifest["checks"])

    @property
    def checks(self) -> list[dict]:
        return self.manifest["checks"]


class RunContext:
    """Collects outputs and check results for one experiment run."""

    def __init__(self, name, params, seed, out_dir, figures=True):
        self.name = name
        self.params = params
        self.seed = seed
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.figures_enabled = figures
        self.files: list[dict] = []
        self.checks: list[dict] = []
        self.summary: dict = {}

    def emit_csv(self, name, header, rows):
        write_csv(self.out / name, header, rows)
        self.files.append({"name": name, "kind": "csv"})

    def emit_with(self, name, writer, kind="csv"):
        writer(self.out / name)
        self.files.append({"name": name, "kind": kind})

    def figure(self, name, render, *args, **kwargs):
        if not self.figures_enabled:
            return
        render(self.out / name, *args, **kwargs)
        self.files.append({"name": name, "kind": "figure"})

    def check(self, name, passed, detail):
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})
        return bool(passed)


def _sqrt_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative and sum to a positive value")
    return np.sqrt(w / w.sum())


# ----------------------------------------------------------------------
# runners
# ----------------------------------------------------------------------

def _run_gamblers_ruin(ctx: RunContext) -> None:
    p = ctx.params
    freq, summary = quantum_ruin_ensemble(
        p1=p["p1"],
        eigenvalues=tuple(p["eigenvalues"]),
        lam=p["lam"],
        dt=p["dt"],
        t_final=p["t_final"],
        n_traj=p["n_traj"],
        seed=ctx.seed,
        n_workers=p["n_workers"],
    )
    classical = play_ruin_games(
        stake_a=p["stake_a"],
        stake_b=p["stake_b"],
        n_games=p["classical_games"],
        seed=ctx.seed + 1,
    )
    ctx.emit_with("quantum_outcomes.csv", summary.write_outcomes_csv)
    ctx.emit_with("branch_weights.csv", summary.write_branch_csv)
    ctx.emit_csv(
        "classical.csv",
        ["games", "wins_a", "frequency_a", "se", "mean_rounds", "expected"],
        [(
            classical.n_games,
            classical.wins_a,
            classical.win_frequency_a,
            classical.frequency_se,
            classical.mean_rounds,
            p["stake_a"] / (p["stake_a"] + p["stake_b"]),
        )],
    )
    ctx.emit_with("summary.json", lambda path: write_json(path, summary.summary_dict()), kind="json")

    # the pinned tolerance is ~3 sigma at the default sample sizes; keep a
    # 3-sigma floor so overridden smaller runs stay meaningful
    q_tol = max(p["tolerance"], 3.0 * math.sqrt(p["p1"] * (1 - p["p1"]) / p["n_traj"]))
    ctx.check(
        "quantum_born_frequency",
        abs(freq - p["p1"]) < q_tol,
        f"|{freq:.5f} - {p['p1']}| < {q_tol:.4f} over {p['n_traj']} trajectories "
        f"({summary.unresolved} unresolved)",
    )
    expected_classical = p["stake_a"] / (p["stake_a"] + p["stake_b"])
    c_tol = max(
        p["tolerance"],
        3.0 * math.sqrt(expected_classical * (1 - expected_classical) / p["classical_games"]),
    )
    ctx.check(
        "classical_win_frequency",
        abs(classical.win_frequency_a - expected_classical) < c_tol,
        f"|{classical.win_frequency_a:.5f} - {expected_classical}| < {c_tol:.4f} "
        f"over {classical.n_games} games (mean length {classical.mean_rounds:.0f})",
    )
    born = summary.branch_weight_mean[0]
    labels = [f"a={ev:g}" for ev in summary.branch_eigenvalues[:, 0]]
    ctx.figure(
        "outcome_frequencies.png",
        plotting.outcome_bars,
        labels,
        summary.outcome_frequencies,
        born,
        summary.outcome_se,
    )
    ctx.summary["quantum_frequency"] = freq
    ctx.summary["classical_frequency"] = classical.win_frequency_a


def _run_collapse_ensemble(ctx: RunContext) -> None:
    p = ctx.params
    amps = _sqrt_weights(p["weights"])
    initial = QuantumState(amps.astype(np.complex128), normalized=True)
    op = HermitianOperator(np.diag(np.asarray(p["eigenvalues"], dtype=float)))
    n_steps = int(round(p["t_final"] / p["dt"]))
    model = CslModel(None, [op], lam=p["lam"], dt=p["dt"], n_steps=n_steps)
    summary = run_ensemble(
        initial, model, n_traj=p["n_traj"], seed=ctx.seed, n_workers=p["n_workers"]
    )
    sample = sample_trajectory(initial, model, SeededRng(ctx.seed, p["n_traj"]))

    ctx.emit_with("outcomes.csv", summary.write_outcomes_csv)
    ctx.emit_with("branch_weights.csv", summary.write_branch_csv)
    ctx.emit_with("density.csv", summary.write_density_csv)
    ctx.emit_with("sample_trajectory.csv", sample.write_csv)
    ctx.emit_with("summary.json", lambda path: write_json(path, summary.summary_dict()), kind="json")

    resolved = summary.n_traj - summary.unresolved
    born = summary.branch_weight_mean[0]
    chi = stats.chisquare(summary.outcome_counts, f_exp=born * resolved)
    ctx.check(
        "born_rule_chisquare",
        chi.pvalue > p["p_threshold"],
        f"chi-square p = {chi.pvalue:.4f} > {p['p_threshold']} "
        f"(counts {summary.outcome_counts.tolist()}, {summary.unresolved} unresolved)",
    )
    diag_se = np.array([summary.rho_se[c].diagonal() for c in range(len(summary.checkpoint_steps))])
    drift = np.abs(summary.branch_weight_mean - born[None, :])
    allowed = 5.0 * diag_se + 1e-12
    ctx.check(
        "martingale_branch_weights",
        bool(np.all(drift <= allowed)),
        f"max |mean weight - Born| = {drift.max():.5f} within 5 SE everywhere",
    )
    ctx.figure(
        "branch_weights.png",
        plotting.branch_weights,
        summary.checkpoint_times,
        summary.branch_weight_mean,
        born,
        sample.branch_weights,
        np.arange(sample.branch_weights.shape[0]) * model.dt,
    )


def _run_offdiag_decay(ctx: RunContext) -> None:
    p = ctx.params
    amps = np.array([math.sqrt(p["p1"]), math.sqrt(1 - p["p1"])], dtype=np.complex128)
    initial = QuantumState(amps, normalized=True)
    e1, e2 = (float(v) for v in p["eigenvalues"])
    op = HermitianOperator(np.diag([e1, e2]))
    n_steps = int(round(p["t_final"] / p["dt"]))
    n_check = int(p["n_checkpoints"])
    if n_steps % n_check:
        raise ValueError("t_final/dt must be divisible by n_checkpoints")
    steps = [k * (n_steps // n_check) for k in range(n_check + 1)]
    model = CslModel(None, [op], lam=p["lam"], dt=p["dt"], n_steps=n_steps)
    summary = run_ensemble(
        initial, model, n_traj=p["n_traj"], seed=ctx.seed,
        checkpoints=steps, n_workers=p["n_workers"],
    )
    times = summary.checkpoint_times
    mc = np.array([summary.rho_mean[c][0, 1] for c in range(len(steps))])
    se = np.array([summary.rho_se[c][0, 1] for c in range(len(steps))])
    ana = np.array(
        [analytic_offdiag(amps[0], amps[1], e1, e2, p["lam"], t) for t in times]
    )

    rho0 = DensityMatrix.from_state(initial)
    lmodel = LindbladModel(None, [op], p["lam"])
    master = integrate_master(
        rho0, lmodel, p["t_final"], p["master_dt"], record_times=list(times)
    )
    master12 = np.array([rho.matrix[0, 1] for rho in master.matrices])
    master_rel = np.abs(master12 - ana) / np.abs(ana)

    rows = [
        (times[c], mc[c].real, mc[c].imag, abs(mc[c]), se[c], abs(ana[c]),
         abs(master12[c]), master_rel[c])
        for c in range(len(steps))
    ]
    ctx.emit_csv(
        "offdiag.csv",
        ["time", "mc_re", "mc_im", "mc_abs", "se", "analytic_abs", "master_abs",
         "master_rel_err"],
        rows,
    )
    nonzero = slice(1, None)
    dev = np.abs(np.abs(mc[nonzero]) - np.abs(ana[nonzero]))
    ctx.check(
        "ensemble_matches_analytic",
        bool(np.all(dev <= 5.0 * se[nonzero] + 1e-12)),
        f"max |MC - analytic| = {dev.max():.2e} within 5 SE at {n_check} checkpoints",
    )
    ctx.check(
        "master_matches_analytic",
        bool(np.max(master_rel[nonzero]) <= p["master_rel_tol"]),
        f"max relative error {np.max(master_rel[nonzero]):.2e} <= {p['master_rel_tol']:g}",
    )
    ctx.figure(
        "offdiag_decay.png", plotting.offdiag_decay,
        times[nonzero], np.abs(mc[nonzero]), se[nonzero], np.abs(ana[nonzero]),
    )


def _fixed_hermitian(dim: int, scale: float, seed: int) -> HermitianOperator:
    rng = SeededRng(seed, 0)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (m + m.conj().T)
    op = HermitianOperator(h)
    return HermitianOperator(h * (scale / op.spectral_norm))


def _run_master_vs_ensemble(ctx: RunContext) -> None:
    p = ctx.params
    dim = 4
    a1 = HermitianOperator(np.diag([0.0, 0.0, 1.0, 1.0]))
    a2 = HermitianOperator(np.diag([0.0, 1.0, 0.0, 1.0]))
    h = _fixed_hermitian(dim, p["h_scale"], int(p["h_seed"]))
    initial = QuantumState(np.full(dim, 0.5, dtype=np.complex128), normalized=True)

    n_steps = int(round(p["t_final"] / p["dt"]))
    n_check = int(p["n_checkpoints"])
    steps = [k * (n_steps // n_check) for k in range(n_check + 1)]
    model = CslModel(h, [a1, a2], lam=p["lam"], dt=p["dt"], n_steps=n_steps)
    summary = run_ensemble(
        initial, model, n_traj=p["n_traj"], seed=ctx.seed,
        checkpoints=steps, n_workers=p["n_workers"],
    )
    lmodel = LindbladModel(h, [a1, a2], p["lam"])
    master = integrate_master(
        DensityMatrix.from_state(initial), lmodel, p["t_final"], p["dt"],
        record_times=list(summary.checkpoint_times),
    )

    ctx.emit_with("ensemble_density.csv", summary.write_density_csv)
    ctx.emit_with("master_density.csv", master.write_csv)

    rows = []
    ok = True
    max_dev, max_allowed = [], []
    for c, t in enumerate(summary.checkpoint_times):
        dev = np.abs(summary.rho_mean[c] - master.matrices[c].matrix)
        allowed = 5.0 * summary.rho_se[c] + p["abs_floor"]
        ok &= bool(np.all(dev <= allowed))
        max_dev.append(float(dev.max()))
        max_allowed.append(float(allowed.max()))
        for i in range(dim):
            for j in range(dim):
                rows.append((t, i, j, dev[i, j], allowed[i, j]))
    ctx.emit_csv("comparison.csv", ["time", "row", "col", "abs_dev", "allowed"], rows)
    ctx.check(
        "unraveling_matches_master",
        ok,
        f"entrywise deviation within 5 SE + {p['abs_floor']:g} at "
        f"{n_check + 1} checkpoints over {p['n_traj']} trajectories",
    )
    ctx.figure(
        "ensemble_vs_master.png", plotting.ensemble_vs_master,
        summary.checkpoint_times, max_dev, max_allowed,
    )


def _run_lattice_energy(ctx: RunContext) -> None:
    p = ctx.params
    lam_values = [float(v) for v in p["lam_values"]]
    curves, slopes, energy_rows = [], [], []
    for lam in lam_values:
        config = LatticeConfig(
            n_sites=int(p["n_sites"]),
            n_axes=1,
            spacing=p["spacing"],
            smearing_a=p["smearing_a"],
            lam=lam,
            m0=p["m0"],
            particle_masses=(p["particle_mass"],),
        )
        packet = gaussian_wavepacket(config, config.n_sites // 2, p["packet_width"])
        result = numerical_energy_gain(config, packet, p["t_final"])
        slopes.append(result.slope)
        curves.append((f"lam={lam:g}", result.times, result.energies))
        energy_rows.extend(
            (lam, t, e) for t, e in zip(result.times, result.energies)
        )
    slopes = np.asarray(slopes)
    lams = np.asarray(lam_values)
    predicted = np.array(
        [
            energy_gain_rate(
                p["particle_mass"], lam, p["smearing_a"], p["m0"], hbar=1.0, n_axes=1
            )
            for lam in lams
        ]
    )
    fit_coef = float(np.sum(slopes * lams) / np.sum(lams * lams))
    linear_dev = float(np.max(np.abs(slopes - fit_coef * lams) / slopes))
    slope_err = np.abs(slopes / predicted - 1.0)

    ctx.emit_csv("energy_vs_time.csv", ["lambda", "time", "energy"], energy_rows)
    ctx.emit_csv(
        "slopes.csv",
        ["lambda", "slope", "predicted", "ratio"],
        [
            (lam, s, pr, s / pr)
            for lam, s, pr in zip(lams, slopes, predicted)
        ],
    )
    ctx.check(
        "slope_linear_in_lambda",
        linear_dev < p["linearity_tol"],
        f"max deviation from linear fit {linear_dev:.4f} < {p['linearity_tol']}",
    )
    ctx.check(
        "slope_matches_1d_rate",
        bool(np.all(slope_err < p["slope_rtol"])),
        f"max |slope/analytic - 1| = {slope_err.max():.4f} < {p['slope_rtol']}",
    )
    ctx.figure("energy_curves.png", plotting.energy_curves, curves)
    ctx.figure(
        "slope_fit.png", plotting.slope_fit, lams, slopes, fit_coef,
        float(predicted[0] / lams[0]),
    )


def _run_cosmo_sweep(ctx: RunContext) -> None:
    p = ctx.params
    t_grid = [float(t) for t in p["T_checkpoints"]]
    t_max = max(t_grid)
    rows = []
    numeric_points, analytic_curves = [], []
    worst = {"unitary": 0.0, "collapse": 0.0, "oracle": 0.0}
    for lam in [float(v) for v in p["lam_values"]]:
        params = CosmoParams(
            m=p["m"], g=p["g"], V=int(p["V"]), lam=lam, T=t_max, n_max=int(p["n_max"])
        )
        fraction = p["unitary_rule_fraction"] if lam == 0.0 else 1.0
        times, numeric = mean_n_numerical(params, record_times=t_grid, rule_fraction=fraction)
        _, oracle = moment_ode_oracle(params, record_times=times)
        for t, n_num, n_or in zip(times, numeric, oracle):
            if t == 0.0:
                continue
            ana = mean_n_csl(params.at_time(t))
            rel_num = abs(n_num - ana) / abs(ana)
            rel_or = abs(n_or - ana) / abs(ana)
            rows.append((lam, t, ana, n_num, n_or, rel_num, rel_or))
            key = "unitary" if lam == 0.0 else "collapse"
            worst[key] = max(worst[key], rel_num)
            worst["oracle"] = max(worst["oracle"], rel_or)
        dense_t = np.linspace(1e-3, t_max, 240)
        dense_n = [mean_n_csl(params.at_time(t)) for t in dense_t]
        analytic_curves.append((f"lam={lam:g} analytic", dense_t, dense_n))
        numeric_points.append((f"lam={lam:g} numerical", times, numeric))

    ctx.emit_csv(
        "sweep.csv",
        ["lambda", "T", "n_analytic", "n_numerical", "n_oracle",
         "rel_err_numerical", "rel_err_oracle"],
        rows,
    )
    ctx.check(
        "unitary_limit_matches",
        worst["unitary"] <= p["rel_tol_unitary"],
        f"lam=0 numerical vs oscillation: max rel err {worst['unitary']:.2e} "
        f"<= {p['rel_tol_unitary']:g}",
    )
    ctx.check(
        "collapse_rows_match",
        worst["collapse"] <= p["rel_tol_numerical"],
        f"lam>0 numerical vs closed form: max rel err {worst['collapse']:.2e} "
        f"<= {p['rel_tol_numerical']:g}",
    )
    ctx.check(
        "moment_oracle_matches",
        worst["oracle"] <= p["rel_tol_oracle"],
        f"moment ODE vs closed form: max rel err {worst['oracle']:.2e} "
        f"<= {p['rel_tol_oracle']:g}",
    )
    ctx.figure("mean_number.png", plotting.cosmo_curves, analytic_curves, numeric_points)


def _run_zeno_sweep(ctx: RunContext) -> None:
    p = ctx.params
    m, g, T, v = p["m"], p["g"], p["T"], int(p["V"])
    lams = m * np.logspace(p["log10_min"], p["log10_max"], int(p["grid_points"]))
    nbar = np.array(
        [mean_n_csl(CosmoParams(m=m, g=g, V=v, lam=lam, T=T)) for lam in lams]
    )
    ctx.emit_csv("zeno_analytic.csv", ["lambda", "n_mean"], list(zip(lams, nbar)))

    above = lams > 10.0 * m
    idx = np.flatnonzero(above)
    monotone = bool(np.all(np.diff(nbar[idx]) < 0.0))
    ctx.check(
        "decreasing_beyond_10m",
        monotone,
        f"n_mean strictly decreasing over {idx.size} grid points with lam > 10 m",
    )
    n_at_m = mean_n_csl(CosmoParams(m=m, g=g, V=v, lam=m, T=T))
    n_at_1000m = mean_n_csl(CosmoParams(m=m, g=g, V=v, lam=1000.0 * m, T=T))
    ratio = n_at_1000m / n_at_m
    ctx.check(
        "zeno_suppression",
        ratio < p["ratio_max"],
        f"n(lam=1000m)/n(lam=m) = {ratio:.4f} < {p['ratio_max']}",
    )

    numeric_rows = []
    num_ratio = {}
    for lam in [float(x) for x in p["numerical_lams"]]:
        n_max = int(p["n_max_zeno"]) if lam >= 100.0 * m else int(p["n_max"])
        params = CosmoParams(m=m, g=g, V=v, lam=lam, T=T, n_max=n_max)
        times, values = mean_n_numerical(params, record_times=[T])
        ana = mean_n_csl(params.at_time(times[-1]))
        numeric_rows.append((lam, float(values[-1]), ana, abs(values[-1] - ana) / ana))
        num_ratio[lam] = float(values[-1])
    ctx.emit_csv(
        "zeno_numerical.csv",
        ["lambda", "n_numerical", "n_analytic", "rel_err"],
        numeric_rows,
    )
    lam_lo = min(num_ratio)
    lam_hi = max(num_ratio)
    ratio_num = num_ratio[lam_hi] / num_ratio[lam_lo]
    ctx.check(
        "zeno_suppression_numerical",
        ratio_num < p["ratio_max"],
        f"numerical n(lam={lam_hi:g})/n(lam={lam_lo:g}) = {ratio_num:.4f} "
        f"< {p['ratio_max']}",
    )
    markers = [(lam, n, f"lam={lam:g}") for lam, n, *_ in numeric_rows]
    ctx.figure("zeno.png", plotting.zeno_curve, lams, nbar, markers)


def _run_constants_check(ctx: RunContext) -> None:
    p = ctx.params
    mass = p["mass"]
    rate = energy_gain_rate(
        mass, lam=p["lam"], a=p["smearing_a"], m0=constants.PROTON_MASS,
        hbar=constants.HBAR, n_axes=3,
    )
    energy = rate * p["t_universe"]
    mc2 = mass * constants.SPEED_OF_LIGHT**2
    ratio = energy / mc2
    target = p["ratio_target"]
    factor = p["ratio_factor"]
    ctx.emit_csv(
        "constants.csv",
        ["quantity", "value", "unit"],
        [
            ("energy_gain_rate", rate, "W"),
            ("energy_over_t_universe", energy, "J"),
            ("rest_energy", mc2, "J"),
            ("ratio", ratio, "1"),
            ("ratio_over_target", ratio / target, "1"),
        ],
    )
    ctx.check(
        "ratio_within_factor",
        target / factor <= ratio <= target * factor,
        f"E/mc^2 = {ratio:.3e} within factor {factor:g} of {target:g} "
        f"(rate {rate:.3e} W over {p['t_universe']:.2e} s)",
    )
    ctx.summary["ratio"] = ratio


def _run_ledger_demo(ctx: RunContext) -> None:
    p = ctx.params
    config_on = LatticeConfig(
        n_sites=int(p["n_sites"]),
        n_axes=1,
        spacing=p["spacing"],
        smearing_a=p["smearing_a"],
        lam=p["lam"],
        m0=p["m0"],
        particle_masses=(p["particle_mass"],),
    )
    h = kinetic_hamiltonian(config_on)
    packet = gaussian_wavepacket(config_on, config_on.n_sites // 2, p["packet_width"])
    rho0 = DensityMatrix.from_state(packet)

    model_on = build_master_model(config_on, h)
    series_on, rho_mid = track_ledger(
        model_on, rho0, p["t_collapse_on"], record_every=int(p["record_every"])
    )
    # collapse switched off: field density must stay pinned in place
    model_off = LindbladModel(h, model_on.collapse_ops, 0.0)
    series_off, _ = track_ledger(
        model_off, rho_mid, p["t_collapse_off"],
        record_every=int(p["record_every"]), ledger0=series_on.final,
    )
    combined = LedgerSeries(series_on.ledgers + series_off.ledgers[1:])
    ctx.emit_with("ledger.csv", combined.write_csv)
    final = combined.final
    ctx.emit_csv(
        "w_density_final.csv",
        ["site", "w_density"],
        list(enumerate(final.w_density)),
    )

    drift = combined.max_conservation_drift()
    ctx.check(
        "total_energy_conserved",
        drift <= 1e-9,
        f"max relative drift of E_particles + E_w = {drift:.2e} <= 1e-9",
    )
    gains = np.array([led.particle_energy for led in combined.ledgers])
    w_tot = np.array([led.w_field_energy for led in combined.ledgers])
    gained = gains - gains[0]
    sign_ok = bool(np.all(w_tot[gained >= 0.0] <= 1e-12 * np.maximum(1.0, np.abs(gained[gained >= 0.0]))))
    ctx.check(
        "w_energy_nonpositive",
        sign_ok,
        "integrated w density <= 0 whenever cumulative particle gain >= 0",
    )
    frozen_dev = max(
        float(np.abs(led.w_density - series_off.ledgers[0].w_density).max())
        for led in series_off.ledgers
    )
    ctx.check(
        "density_stuck_in_space",
        frozen_dev == 0.0,
        f"w density bitwise frozen while collapse is off (max change {frozen_dev:g})",
    )
    ctx.figure(
        "ledger.png", plotting.ledger_curves,
        combined.times, gains, w_tot, final.w_density,
    )


# ----------------------------------------------------------------------
# registry
# ----------------------------------------------------------------------

_COMMON = {
    "n_workers": Param(1, "worker threads for trajectory ensembles"),
}

EXPERIMENTS: dict[str, Experiment] = {}


def _register(name, summary, params, runner):
    EXPERIMENTS[name] = Experiment(name, summary, params, runner)


_register(
    "gamblers_ruin",
    "Born-rule collapse statistics vs the classical ruin game",
    {
        "p1": Param(0.6, "Born weight of the first branch"),
        "eigenvalues": Param([1.0, -1.0], "collapse-operator eigenvalues"),
        "lam": Param(1.0, "collapse rate"),
        "dt": Param(0.0125, "trajectory time step"),
        "t_final": Param(8.0, "trajectory duration (step cap)"),
        "n_traj": Param(10_000, "number of trajectories"),
        "stake_a": Param(60, "classical stake of player A (dollars)"),
        "stake_b": Param(40, "classical stake of player B (dollars)"),
        "classical_games": Param(10_000, "number of classical coin games"),
        "tolerance": Param(0.015, "allowed |frequency - expected| (about 3 sigma)"),
        **_COMMON,
    },
    _run_gamblers_ruin,
)

_register(
    "collapse_ensemble",
    "Outcome frequencies and branch-weight martingale for a superposition",
    {
        "weights": Param([1 / 3, 1 / 3, 1 / 3], "Born weights of the initial state"),
        "eigenvalues": Param([1.0, 2.0, 3.0], "collapse-operator eigenvalues"),
        "lam": Param(1.0, "collapse rate"),
        "dt": Param(0.01, "trajectory time step"),
        "t_final": Param(20.0, "trajectory duration (step cap)"),
        "n_traj": Param(3000, "number of trajectories"),
        "p_threshold": Param(0.001, "chi-square p-value floor for the Born check"),
        **_COMMON,
    },
    _run_collapse_ensemble,
)

_register(
    "offdiag_decay",
    "Ensemble and master-equation off-diagonal decay vs the closed form",
    {
        "p1": Param(0.6, "Born weight of the first branch"),
        "eigenvalues": Param([1.0, -1.0], "collapse-operator eigenvalues"),
        "lam": Param(1.0, "collapse rate"),
        "dt": Param(0.005, "trajectory time step"),
        "t_final": Param(1.0, "duration"),
        "n_traj": Param(10_000, "number of trajectories"),
        "n_checkpoints": Param(10, "number of nonzero comparison times"),
        "master_dt": Param(0.002, "master-equation step"),
        "master_rel_tol": Param(1e-8, "allowed relative error of the integrator"),
        **_COMMON,
    },
    _run_offdiag_decay,
)

_register(
    "master_vs_ensemble",
    "Unraveling equivalence: trajectory average vs master equation (4-dim, H != 0)",
    {
        "lam": Param(1.0, "collapse rate"),
        "dt": Param(0.001, "shared time step"),
        "t_final": Param(1.0, "duration"),
        "n_traj": Param(10_000, "number of trajectories"),
        "n_checkpoints": Param(5, "number of nonzero comparison times"),
        "h_scale": Param(1.0, "spectral norm of the fixed random Hamiltonian"),
        "h_seed": Param(7, "stream key for the fixed Hamiltonian"),
        "abs_floor": Param(1e-10, "absolute comparison floor added to 5 SE"),
        **_COMMON,
    },
    _run_master_vs_ensemble,
)

_register(
    "lattice_energy",
    "Collapse-induced energy gain of a free lattice particle",
    {
        "n_sites": Param(48, "lattice sites"),
        "spacing": Param(1.0 / 6.0, "lattice spacing (units of the smearing length)"),
        "smearing_a": Param(1.0, "smearing length"),
        "particle_mass": Param(1.0, "particle mass (units of m0)"),
        "m0": Param(1.0, "reference mass"),
        "lam_values": Param([0.5, 1.0, 1.5, 2.0], "collapse rates to sweep"),
        "t_final": Param(1.0, "fit window"),
        "packet_width": Param(1.0, "initial Gaussian packet width"),
        "linearity_tol": Param(0.02, "allowed deviation from linearity in lam"),
        "slope_rtol": Param(0.10, "allowed relative deviation from the analytic rate"),
    },
    _run_lattice_energy,
)

_register(
    "cosmo_sweep",
    "Vacuum drive: truncated-Fock master equation vs closed form and moment ODEs",
    {
        "m": Param(1.0, "mode mass/frequency"),
        "g": Param(0.1, "drive strength"),
        "V": Param(1, "number of cells"),
        "lam_values": Param([0.0, 0.1, 0.5, 2.0], "collapse rates to sweep"),
        "T_checkpoints": Param([2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0],
                               "drive times to compare at"),
        "n_max": Param(16, "Fock truncation"),
        "rel_tol_numerical": Param(1e-3, "allowed relative error, lam > 0 rows"),
        "rel_tol_unitary": Param(1e-6, "allowed relative error, lam = 0 rows"),
        "rel_tol_oracle": Param(1e-8, "allowed closed-form vs moment-ODE error"),
        "unitary_rule_fraction": Param(0.2, "step-rule fraction for the lam = 0 rows"),
    },
    _run_cosmo_sweep,
)

_register(
    "zeno_sweep",
    "Watched-pot suppression: mean particle number vs collapse rate",
    {
        "m": Param(1.0, "mode mass/frequency"),
        "g": Param(0.25, "drive strength"),
        "V": Param(1, "number of cells"),
        "T": Param(4.0, "drive time"),
        "log10_min": Param(-1.0, "analytic grid: log10 of smallest lam/m"),
        "log10_max": Param(3.0, "analytic grid: log10 of largest lam/m"),
        "grid_points": Param(41, "analytic grid size"),
        "numerical_lams": Param([1.0, 1000.0], "rates for numerical spot checks"),
        "n_max": Param(16, "Fock truncation for moderate rates"),
        "n_max_zeno": Param(4, "Fock truncation for the deep Zeno regime"),
        "ratio_max": Param(0.01, "required n(1000 m)/n(m) suppression"),
    },
    _run_zeno_sweep,
)

_register(
    "constants_check",
    "Physical-scale arithmetic: collapse energy gain over the age of the universe",
    {
        "mass": Param(constants.PROTON_MASS, "particle mass (kg)"),
        "lam": Param(constants.GRW_COLLAPSE_RATE, "collapse rate (1/s)"),
        "smearing_a": Param(constants.GRW_SMEARING_LENGTH, "smearing length (m)"),
        "t_universe": Param(constants.AGE_OF_UNIVERSE, "age of the universe (s)"),
        "ratio_target": Param(1e-16, "expected order of E/mc^2"),
        "ratio_factor": Param(3.0, "allowed factor around the target"),
    },
    _run_constants_check,
)

_register(
    "ledger_demo",
    "Energy ledger on a lattice run: conservation, sign, stuck-in-space density",
    {
        "n_sites": Param(32, "lattice sites"),
        "spacing": Param(0.25, "lattice spacing"),
        "smearing_a": Param(1.0, "smearing length"),
        "lam": Param(1.0, "collapse rate during the active phase"),
        "particle_mass": Param(1.0, "particle mass"),
        "m0": Param(1.0, "reference mass"),
        "packet_width": Param(1.0, "initial Gaussian packet width"),
        "t_collapse_on": Param(0.5, "duration of the collapse-on phase"),
        "t_collapse_off": Param(0.25, "duration of the collapse-off phase"),
        "record_every": Param(10, "ledger snapshot stride (steps)"),
    },
    _run_ledger_demo,
)


def experiment_names() -> list[str]:
    return sorted(EXPERIMENTS)


def describe_experiments() -> str:
    lines = []
    for name in experiment_names():
        exp = EXPERIMENTS[name]
        lines.append(f"{name}: {exp.summary}")
        for key in sorted(exp.params):
            param = exp.params[key]
            lines.append(f"    {key} = {param.default!r}  # {param.doc}")
    return "\n".join(lines)


def _resolve_parameters(exp: Experiment, overrides: dict) -> dict:
    unknown = sorted(set(overrides) - set(exp.params))
    if unknown:
        raise ValueError(
            f"unknown parameter(s) for {exp.name}: {', '.join(unknown)}; "
            f"known: {', '.join(sorted(exp.params))}"
        )
    resolved = {}
    for key, param in exp.params.items():
        value = overrides.get(key, param.default)
        if isinstance(param.default, float) and isinstance(value, int):
            value = float(value)
        resolved[key] = value
    return resolved


def run_experiment(
    config: ExperimentConfig, figures: bool = True, plot_data: bool = False
) -> ExitReport:
    """Run one named experiment and write its output files and manifest."""
    if config.experiment not in EXPERIMENTS:
        raise ValueError(
            f"unknown experiment {config.experiment!r}; "
            f"known: {', '.join(experiment_names())}"
        )
    exp = EXPERIMENTS[config.experiment]
    params = _resolve_parameters(exp, dict(config.parameters))
    out_dir = Path(config.output_dir or Path("runs") / config.experiment)
    ctx = RunContext(exp.name, params, int(config.seed), out_dir, figures=figures)
    start = time.perf_counter()
    exp.runner(ctx)
    wall = time.perf_counter() - start

    if plot_data:
        for entry in list(ctx.files):
            if entry["kind"] == "csv":
                dat_name = entry["name"].rsplit(".", 1)[0] + ".dat"
                csv_to_plot_data(out_dir / entry["name"], out_dir / dat_name)
                ctx.files.append({"name": dat_name, "kind": "plot-data"})

    manifest = {
        "experiment": exp.name,
        "seed": ctx.seed,
        "config": {"parameters": _jsonable(params), "output_dir": str(out_dir)},
        "outputs": ctx.files,
        "checks": ctx.checks,
        "summary": _jsonable(ctx.summary),
        "wall_time_s": wall,
    }
    write_json(out_dir / "manifest.json", manifest)
    return ExitReport(experiment=exp.name, output_dir=out_dir, manifest=manifest)


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=_json_default))


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)!r}")
