"""Gambler's-ruin coin game and its collapse-dynamics analogue.

Two gamblers toss a fair coin and pass a dollar per toss until one is
broke; the player holding fraction p of the money wins with probability
exactly p (the stake is a martingale).  Collapse dynamics plays the same
game with branch weights: a two-branch superposition with Born weight p on
a branch collapses to that branch in fraction p of trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .csl_dynamics import CslModel, EnsembleSummary, run_ensemble
from .hilbert import HermitianOperator, QuantumState
from .noise import SeededRng

__all__ = ["RuinGameResult", "play_ruin_games", "quantum_ruin_ensemble"]


@dataclass(frozen=True)
class RuinGameResult:
    n_games: int
    wins_a: int
    mean_rounds: float

    @property
    def win_frequency_a(self) -> float:
        return self.wins_a / self.n_games

    @property
    def frequency_se(self) -> float:
        f = self.win_frequency_a
        return math.sqrt(max(f * (1.0 - f), 0.0) / self.n_games)


def play_ruin_games(
    stake_a: int = 60,
    stake_b: int = 40,
    n_games: int = 10_000,
    seed: int = 1,
    max_rounds: int = 10_000_000,
) -> RuinGameResult:
    """Play many independent ruin games to absorption (vectorized)."""
    if stake_a < 1 or stake_b < 1:
        raise ValueError("both stakes must be positive")
    total = stake_a + stake_b
    rng = SeededRng(seed, 0)
    stakes = np.full(n_games, stake_a, dtype=np.int64)
    rounds = np.zeros(n_games, dtype=np.int64)
    active = np.ones(n_games, dtype=bool)
    played = 0
    while active.any():
        if played >= max_rounds:
            raise RuntimeError("ruin games failed to absorb within max_rounds")
        n_active = int(active.sum())
        steps = np.where(rng.random(n_active) < 0.5, 1, -1)
        stakes[active] += steps
        rounds[active] += 1
        active &= (stakes > 0) & (stakes < total)
        played += 1
    wins = int(np.sum(stakes == total))
    return RuinGameResult(n_games=n_games, wins_a=wins, mean_rounds=float(rounds.mean()))


def quantum_ruin_ensemble(
    p1: float = 0.6,
    eigenvalues: tuple[float, float] = (1.0, -1.0),
    lam: float = 1.0,
    dt: float = 0.0125,
    t_final: float = 8.0,
    n_traj: int = 10_000,
    seed: int = 1,
    n_workers: int = 1,
) -> tuple[float, EnsembleSummary]:
    """Collapse-to-outcome frequencies for a two-branch superposition.

    Returns the frequency of collapse onto the branch holding weight
    ``p1`` plus the full ensemble summary.  H = 0, so the branch weights
    perform the fair game exactly.
    """
    if not 0.0 < p1 < 1.0:
        raise ValueError("p1 must lie strictly between 0 and 1")
    amps = np.array([math.sqrt(p1), math.sqrt(1.0 - p1)], dtype=np.complex128)
    initial = QuantumState(amps, normalized=True)
    op = HermitianOperator(np.diag(np.asarray(eigenvalues, dtype=float)))
    n_steps = int(round(t_final / dt))
    model = CslModel(None, [op], lam=lam, dt=dt, n_steps=n_steps)
    summary = run_ensemble(
        initial, model, n_traj=n_traj, seed=seed, n_workers=n_workers
    )
    # outcome branches follow the joint eigenbasis (ascending eigenvalues);
    # find the branch carrying the weight-p1 basis state
    target = int(np.argmin(np.abs(summary.branch_eigenvalues[:, 0] - eigenvalues[0])))
    freq = float(summary.outcome_frequencies[target])
    return freq, summary
