"""Figure rendering for experiment reports.

Every figure goes straight to a file (Agg backend, no display); the
experiment runners call these alongside the delimited output so a run
directory is self-contained.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _finish(fig, path):
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def outcome_bars(path, labels, observed, expected, se):
    fig, ax = plt.subplots(figsize=(6, 4))
    pos = np.arange(len(labels))
    ax.bar(pos - 0.2, observed, width=0.4, yerr=3 * np.asarray(se), capsize=3,
           label="observed", color="tab:blue")
    ax.bar(pos + 0.2, expected, width=0.4, label="expected", color="tab:orange")
    ax.set_xticks(pos, labels)
    ax.set_ylabel("frequency")
    ax.set_title("Collapse outcome frequencies (3-sigma bars)")
    ax.legend()
    return _finish(fig, path)


def offdiag_decay(path, times, mc, se, analytic):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(times, mc, yerr=5 * np.asarray(se), fmt="o", capsize=3,
                label="ensemble (5 SE bars)", color="tab:blue")
    ax.plot(times, analytic, "s--", color="tab:orange", label="analytic")
    ax.set_yscale("log")
    ax.set_xlabel("time")
    ax.set_ylabel("|rho_12|")
    ax.set_title("Off-diagonal decay")
    ax.legend()
    return _finish(fig, path)


def branch_weights(path, times, mean_weights, born, sample=None, sample_times=None):
    fig, ax = plt.subplots(figsize=(6.5, 4))
    dim = mean_weights.shape[1]
    colors = plt.cm.tab10(np.linspace(0, 1, 10))
    for n in range(dim):
        ax.plot(times, mean_weights[:, n], "-o", ms=3, color=colors[n % 10],
                label=f"branch {n} mean")
        ax.axhline(born[n], color=colors[n % 10], ls="--", lw=0.8)
    if sample is not None:
        for n in range(sample.shape[1]):
            ax.plot(sample_times, sample[:, n], color=colors[n % 10], alpha=0.3, lw=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("branch weight")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Branch-weight martingale (dashed: Born weights)")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def ensemble_vs_master(path, times, max_dev, max_allowed):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(times, max_dev, "o-", label="max entrywise |MC - master|")
    ax.plot(times, max_allowed, "s--", label="5 SE + floor")
    ax.set_xlabel("time")
    ax.set_ylabel("deviation")
    ax.set_title("Unraveling vs master equation")
    ax.legend()
    return _finish(fig, path)


def energy_curves(path, curves):
    """curves: list of (label, times, energies)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, times, energies in curves:
        ax.plot(times, energies, label=label)
    ax.set_xlabel("time")
    ax.set_ylabel("Tr(H rho)")
    ax.set_title("Collapse-induced energy gain")
    ax.legend()
    return _finish(fig, path)


def slope_fit(path, lams, slopes, fitted_coef, predicted_coef):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lams, slopes, "o", label="fitted slopes")
    grid = np.linspace(0, max(lams) * 1.05, 50)
    ax.plot(grid, fitted_coef * grid, "-", label=f"linear fit ({fitted_coef:.4g})")
    ax.plot(grid, predicted_coef * grid, "--", label=f"analytic ({predicted_coef:.4g})")
    ax.set_xlabel("collapse rate")
    ax.set_ylabel("dE/dt")
    ax.set_title("Energy-gain slope vs collapse rate")
    ax.legend()
    return _finish(fig, path)


def cosmo_curves(path, analytic_curves, numeric_points):
    """analytic_curves: list of (label, T, nbar); numeric_points likewise."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for label, tt, nn in analytic_curves:
        ax.plot(tt, nn, "-", label=label)
    for label, tt, nn in numeric_points:
        ax.plot(tt, nn, "o", ms=4, label=label)
    ax.set_xlabel("drive time T")
    ax.set_ylabel("mean particle number")
    ax.set_title("Vacuum drive: mean particle number")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def zeno_curve(path, lams, nbars, lam_markers=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(lams, nbars, "-")
    if lam_markers:
        xs, ys, labels = zip(*lam_markers)
        ax.loglog(xs, ys, "o")
        for x, y, lab in lam_markers:
            ax.annotate(lab, (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("collapse rate")
    ax.set_ylabel("mean particle number")
    ax.set_title("Watched-pot suppression of vacuum excitation")
    return _finish(fig, path)


def ledger_curves(path, times, particle, field, density_final):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(times, particle, label="particles")
    ax1.plot(times, field, label="w field")
    ax1.plot(times, np.asarray(particle) + np.asarray(field), "k--", label="total")
    ax1.set_xlabel("time")
    ax1.set_ylabel("energy")
    ax1.set_title("Energy ledger")
    ax1.legend()
    ax2.bar(np.arange(len(density_final)), density_final, color="tab:green")
    ax2.set_xlabel("site")
    ax2.set_ylabel("w energy density")
    ax2.set_title("Final pinned field density")
    return _finish(fig, path)
