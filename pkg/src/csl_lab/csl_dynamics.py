"""Linear non-unitary collapse evolution and trajectory/ensemble sampling.

One evolution step applies the unitary substep ``exp(-i H dt)`` followed by
the collapse factor ``exp(-(dt/(4 lam)) sum_k (w_k - 2 lam A_k)^2)``, which
is diagonal in the joint eigenbasis of the commuting collapse operators.
Noise for each step is drawn conditioned on the post-unitary normalized
state; with that conditioning the discrete trajectory measure is exactly
the squared norm of the linearly evolved state times the Gaussian noise
measure, so ensemble averages of normalized projectors reproduce the
master equation (exactly for ``H = 0``, to first order in ``dt``
otherwise).

Trajectories are embarrassingly parallel.  Each trajectory owns a
counter-based random stream keyed by ``(seed, trajectory_index)`` and the
ensemble reduction runs in fixed trajectory order, so results are
bit-reproducible for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .csvio import write_csv
from .hilbert import (
    DensityMatrix,
    HermitianOperator,
    JointEigenbasis,
    QuantumState,
    joint_eigenbasis,
)
from .noise import NoiseTrajectory, SeededRng, _mixture_draw

COLLAPSE_THRESHOLD = 1.0 - 1e-6
DEFAULT_CHUNK_SIZE = 2048

__all__ = [
    "CslModel",
    "TrajectoryRecord",
    "EnsembleSummary",
    "NormUnderflowError",
    "evolve_linear_step",
    "trajectory_probability",
    "sample_trajectory",
    "run_ensemble",
    "COLLAPSE_THRESHOLD",
]


class NormUnderflowError(RuntimeError):
    """A collapse factor drove the state norm to zero; dt is too large for
    ``lam * (eigenvalue spread)^2``."""


class CslModel:
    """Collapse model: Hamiltonian, commuting collapse operators, rate and
    time grid.

    ``hamiltonian`` may be ``None`` (free collapse), a single operator, or
    a per-step schedule (sequence of length ``n_steps``) for time-dependent
    driving.  Collapse operators must mutually commute; they need not
    commute with the Hamiltonian.
    """

    def __init__(
        self,
        hamiltonian,
        collapse_ops: Sequence[HermitianOperator],
        lam: float,
        dt: float,
        n_steps: int,
    ):
        if lam < 0.0:
            raise ValueError("lam must be non-negative")
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        n_steps = int(n_steps)
        if n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        self.lam = float(lam)
        self.dt = float(dt)
        self.n_steps = n_steps
        self.collapse_ops = tuple(collapse_ops)
        self.basis: JointEigenbasis = joint_eigenbasis(self.collapse_ops)
        self.eigenvalue_table = self.basis.eigenvalues  # (dim, n_channels)

        if hamiltonian is None:
            self._schedule = None
        elif isinstance(hamiltonian, HermitianOperator):
            self._schedule = (hamiltonian,)
        else:
            schedule = tuple(hamiltonian)
            if len(schedule) != n_steps:
                raise ValueError(
                    f"Hamiltonian schedule has {len(schedule)} entries "
                    f"for {n_steps} steps"
                )
            self._schedule = schedule
        self.hamiltonian = hamiltonian
        self._prop_cache: dict[int, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def n_channels(self) -> int:
        return self.eigenvalue_table.shape[1]

    def hamiltonian_at(self, step_index: int) -> HermitianOperator | None:
        if self._schedule is None:
            return None
        if len(self._schedule) == 1:
            return self._schedule[0]
        return self._schedule[step_index]

    def propagator_eig(self, step_index: int) -> np.ndarray | None:
        """Unitary substep ``exp(-i H dt)`` expressed in the joint
        eigenbasis of the collapse operators; ``None`` when ``H`` is 0."""
        h = self.hamiltonian_at(step_index)
        if h is None:
            return None
        key = id(h)
        cached = self._prop_cache.get(key)
        if cached is None:
            if h.dim != self.dim:
                raise ValueError("Hamiltonian dimension mismatch")
            vals, vecs = h.eigenvalues, h.eigenvectors
            u = (vecs * np.exp(-1j * vals * self.dt)) @ vecs.conj().T
            v = self.basis.vectors
            cached = v.conj().T @ u @ v
            self._prop_cache[key] = cached
        return cached

    def damping_factors(self, w: np.ndarray) -> np.ndarray:
        """Collapse multipliers per joint eigenvalue branch for noise ``w``.

        ``w`` may be a single (n_channels,) vector or a batch
        (batch, n_channels); for ``lam == 0`` the factor is identically 1.
        """
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        if w.shape[-1] != self.n_channels:
            raise ValueError("noise vector has wrong channel count")
        if self.lam == 0.0:
            out = np.ones((w.shape[0], self.dim))
        else:
            dev = w[:, None, :] - 2.0 * self.lam * self.eigenvalue_table[None, :, :]
            q = np.sum(dev * dev, axis=-1)
            out = np.exp(-(self.dt / (4.0 * self.lam)) * q)
        return out


@dataclass(frozen=True)
class TrajectoryRecord:
    """One sampled trajectory: noise record, per-step states and norms.

    The squared norm of the linearly evolved state decays exponentially
    with the step count for typical noise, so the primary record is
    ``log_norms_sq``; ``norms_sq`` and the unnormalized ``states`` are
    reconstructed views (they underflow only beyond exp(-745), far outside
    desk-scale runs).
    """

    dt: float
    noise: NoiseTrajectory
    directions: np.ndarray      # (n_steps+1, dim) unit vectors, original basis
    log_norms_sq: np.ndarray    # (n_steps+1,)
    branch_weights: np.ndarray  # (n_steps+1, dim) joint-eigenbasis weights
    outcome: int | None
    outcome_step: int | None

    @property
    def n_steps(self) -> int:
        return self.log_norms_sq.size - 1

    @property
    def norms_sq(self) -> np.ndarray:
        return np.exp(self.log_norms_sq)

    @property
    def states(self) -> list[QuantumState]:
        scale = np.exp(0.5 * self.log_norms_sq)
        return [
            QuantumState(self.directions[n] * scale[n])
            for n in range(self.log_norms_sq.size)
        ]

    def state(self, step: int) -> QuantumState:
        return QuantumState(self.directions[step] * math.exp(0.5 * self.log_norms_sq[step]))

    def write_csv(self, path) -> None:
        dim = self.directions.shape[1]
        header = ["step", "time", "log_norm_sq", "norm_sq"] + [
            f"weight_{n}" for n in range(dim)
        ]
        rows = []
        for n in range(self.log_norms_sq.size):
            rows.append(
                [n, n * self.dt, self.log_norms_sq[n], math.exp(self.log_norms_sq[n])]
                + list(self.branch_weights[n])
            )
        write_csv(path, header, rows)


def evolve_linear_step(
    state: QuantumState, model: CslModel, w, step_index: int = 0
) -> QuantumState:
    """One linear evolution step: unitary substep, then the collapse factor.

    In the joint eigenbasis the collapse factor multiplies the amplitude of
    branch n by ``exp(-(dt/(4 lam)) sum_k (w_k - 2 lam a_n(k))^2)``.  The
    output is unnormalized; for ``lam == 0`` the collapse factor is the
    identity.
    """
    if state.basis_dim != model.dim:
        raise ValueError("state and model dimensions differ")
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size != model.n_channels:
        raise ValueError("noise vector has wrong channel count")
    if not np.all(np.isfinite(w)):
        raise ValueError("noise must be finite")
    y = model.basis.to_eigenbasis(state.amplitudes)
    prop = model.propagator_eig(step_index)
    if prop is not None:
        y = prop @ y
    y = y * model.damping_factors(w)[0]
    return QuantumState(model.basis.from_eigenbasis(y))


def trajectory_probability(
    initial: QuantumState, model: CslModel, noise: NoiseTrajectory
) -> float:
    """Squared norm of the linearly evolved state after ``model.n_steps``
    steps, i.e. the trajectory's probability density relative to the raw
    noise measure."""
    _require_normalized(initial, model)
    if model.n_steps > 0:
        if noise.n_channels != model.n_channels:
            raise ValueError("noise channel count does not match the model")
        if noise.n_steps < model.n_steps:
            raise ValueError("noise record is shorter than the model's step count")
    y = model.basis.to_eigenbasis(initial.amplitudes)
    for step in range(model.n_steps):
        prop = model.propagator_eig(step)
        if prop is not None:
            y = prop @ y
        y = y * model.damping_factors(noise.samples[step])[0]
    return float(np.sum(np.abs(y) ** 2))


def sample_trajectory(
    initial: QuantumState, model: CslModel, rng: SeededRng
) -> TrajectoryRecord:
    """Sample one trajectory under the physical probability rule.

    Per step: apply the unitary substep, draw the noise from the exact
    Gaussian mixture conditioned on the (normalized) intermediate state,
    apply the collapse factor, renormalize, and accumulate the log norm.
    The outcome is the first branch whose weight crosses the collapse
    threshold; evolution continues to the hard step cap either way.

    Noise variates are pre-drawn from the trajectory's stream as one
    uniform block then one normal block, which is the same protocol the
    vectorized ensemble runner uses.
    """
    _require_normalized(initial, model)
    if not model.lam > 0.0:
        raise ValueError("sampling requires lam > 0")
    if model.n_steps < 1:
        raise ValueError("sampling requires at least one step")
    n_steps, dim, n_ch = model.n_steps, model.dim, model.n_channels
    u_block = rng.random(n_steps)
    z_block = rng.standard_normal((n_steps, n_ch))

    y = model.basis.to_eigenbasis(initial.amplitudes)
    directions = np.empty((n_steps + 1, dim), dtype=np.complex128)
    log_norms = np.zeros(n_steps + 1)
    weights = np.empty((n_steps + 1, dim))
    noise_samples = np.empty((n_steps, n_ch))
    directions[0] = initial.amplitudes
    weights[0] = np.abs(y) ** 2
    outcome = outcome_step = None

    log_norm = 0.0
    for step in range(n_steps):
        prop = model.propagator_eig(step)
        if prop is not None:
            y = prop @ y
        p = np.abs(y) ** 2
        branch, w = _mixture_draw(
            p, model.eigenvalue_table, model.lam, model.dt, u_block[step], z_block[step]
        )
        noise_samples[step] = w
        y = y * model.damping_factors(w)[0]
        r = float(np.sum(np.abs(y) ** 2))
        if not (r > 0.0 and math.isfinite(r)):
            raise NormUnderflowError(
                "state norm underflowed in one step; reduce dt relative to "
                "lam * (eigenvalue spread)^2"
            )
        log_norm += math.log(r)
        y = y / math.sqrt(r)
        p = np.abs(y) ** 2
        directions[step + 1] = model.basis.from_eigenbasis(y)
        log_norms[step + 1] = log_norm
        weights[step + 1] = p
        if outcome is None and p.max() >= COLLAPSE_THRESHOLD:
            outcome = int(np.argmax(p))
            outcome_step = step + 1

    return TrajectoryRecord(
        dt=model.dt,
        noise=NoiseTrajectory(model.dt, noise_samples),
        directions=directions,
        log_norms_sq=log_norms,
        branch_weights=weights,
        outcome=outcome,
        outcome_step=outcome_step,
    )


@dataclass(frozen=True)
class EnsembleSummary:
    """Monte Carlo summary over trajectories at fixed checkpoints.

    ``rho_mean`` is the averaged normalized projector (the Monte Carlo
    estimate of the ensemble density matrix) in the original basis;
    ``rho_se`` is the per-entry standard error
    ``sqrt((E|z|^2 - |Ez|^2) / n)``.
    """

    n_traj: int
    seed: int
    dt: float
    n_steps: int
    checkpoint_steps: np.ndarray
    branch_eigenvalues: np.ndarray  # (dim, n_channels) joint eigenvalue table
    rho_mean: np.ndarray          # (n_checkpoints, dim, dim) complex
    rho_se: np.ndarray            # (n_checkpoints, dim, dim) real
    branch_weight_mean: np.ndarray  # (n_checkpoints, dim)
    mean_log_norm_sq: np.ndarray  # (n_checkpoints,)
    mean_norm_sq: np.ndarray      # (n_checkpoints,)
    outcome_counts: np.ndarray    # (dim,)
    unresolved: int

    @property
    def checkpoint_times(self) -> np.ndarray:
        return self.checkpoint_steps * self.dt

    @property
    def dim(self) -> int:
        return self.rho_mean.shape[1]

    @property
    def outcome_frequencies(self) -> np.ndarray:
        return self.outcome_counts / self.n_traj

    @property
    def outcome_se(self) -> np.ndarray:
        f = self.outcome_frequencies
        return np.sqrt(np.maximum(f * (1.0 - f), 0.0) / self.n_traj)

    def density_matrix(self, checkpoint: int) -> DensityMatrix:
        rho = self.rho_mean[checkpoint]
        return DensityMatrix(rho / np.trace(rho).real)

    def write_density_csv(self, path) -> None:
        rows = []
        for c, step in enumerate(self.checkpoint_steps):
            t = step * self.dt
            for i in range(self.dim):
                for j in range(self.dim):
                    rows.append(
                        (t, i, j,
                         self.rho_mean[c, i, j].real,
                         self.rho_mean[c, i, j].imag,
                         self.rho_se[c, i, j])
                    )
        write_csv(path, ["time", "row", "col", "re", "im", "se"], rows)

    def write_branch_csv(self, path) -> None:
        rows = []
        for c, step in enumerate(self.checkpoint_steps):
            t = step * self.dt
            for n in range(self.dim):
                rows.append((t, n, self.branch_weight_mean[c, n]))
        write_csv(path, ["time", "branch", "mean_weight"], rows)

    def write_outcomes_csv(self, path) -> None:
        n_ch = self.branch_eigenvalues.shape[1]
        header = (
            ["branch"]
            + [f"eigenvalue_{k}" for k in range(n_ch)]
            + ["count", "frequency", "se"]
        )
        rows = []
        freq = self.outcome_frequencies
        se = self.outcome_se
        for n in range(self.dim):
            rows.append(
                [n, *self.branch_eigenvalues[n], int(self.outcome_counts[n]), freq[n], se[n]]
            )
        rows.append([-1] + [float("nan")] * n_ch + [self.unresolved, self.unresolved / self.n_traj, 0.0])
        write_csv(path, header, rows)

    def summary_dict(self) -> dict:
        return {
            "n_traj": self.n_traj,
            "seed": self.seed,
            "dt": self.dt,
            "n_steps": self.n_steps,
            "checkpoint_times": [float(t) for t in self.checkpoint_times],
            "outcome_frequencies": [float(f) for f in self.outcome_frequencies],
            "outcome_se": [float(s) for s in self.outcome_se],
            "unresolved": self.unresolved,
            "mean_log_norm_sq_final": float(self.mean_log_norm_sq[-1]),
        }


def _require_normalized(state: QuantumState, model: CslModel) -> None:
    if state.basis_dim != model.dim:
        raise ValueError("state and model dimensions differ")
    if abs(state.norm_sq - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")


def _chunk_stats(model, y0, seed, start, count, slots):
    """Evolve trajectories [start, start+count) in lockstep and accumulate
    checkpoint statistics.  Pure function of its arguments, so the result
    is independent of which worker runs it."""
    dim, n_ch, n_steps = model.dim, model.n_channels, model.n_steps
    lam, dt = model.lam, model.dt
    table = model.eigenvalue_table
    vectors_t = model.basis.vectors.T

    u_block = np.empty((count, n_steps))
    z_block = np.empty((count, n_steps, n_ch))
    for i in range(count):
        gen = SeededRng(seed, start + i)
        u_block[i] = gen.random(n_steps)
        z_block[i] = gen.standard_normal((n_steps, n_ch))

    n_slots = len(slots)
    s1 = np.zeros((n_slots, dim, dim), dtype=np.complex128)
    s2 = np.zeros((n_slots, dim, dim))
    wsum = np.zeros((n_slots, dim))
    log_norm_sum = np.zeros(n_slots)
    norm_sum = np.zeros(n_slots)

    y = np.tile(model.basis.to_eigenbasis(y0), (count, 1))
    log_norm = np.zeros(count)
    outcome = np.full(count, -1, dtype=np.int64)
    sqrt_noise = math.sqrt(lam / dt)

    def record(slot):
        psi = y @ vectors_t
        s1[slot] += psi.T @ psi.conj()
        p_orig = np.abs(psi) ** 2
        s2[slot] += p_orig.T @ p_orig
        wsum[slot] += np.sum(np.abs(y) ** 2, axis=0)
        log_norm_sum[slot] += log_norm.sum()
        norm_sum[slot] += np.exp(log_norm).sum()

    if 0 in slots:
        record(slots[0])
    p = np.abs(y) ** 2  # rows stay normalized between steps
    for step in range(n_steps):
        prop = model.propagator_eig(step)
        if prop is not None:
            y = y @ prop.T
            p = np.abs(y) ** 2
        cum = np.cumsum(p, axis=1)
        targets = u_block[:, step] * cum[:, -1]
        branch = np.sum(targets[:, None] >= cum, axis=1)
        np.clip(branch, 0, dim - 1, out=branch)
        w = 2.0 * lam * table[branch] + sqrt_noise * z_block[:, step, :]
        dev = w[:, None, :] - 2.0 * lam * table[None, :, :]
        y = y * np.exp(-(dt / (4.0 * lam)) * np.sum(dev * dev, axis=-1))
        p = np.abs(y) ** 2
        r = p.sum(axis=1)
        if not np.all((r > 0.0) & np.isfinite(r)):
            raise NormUnderflowError(
                "state norm underflowed in one step; reduce dt relative to "
                "lam * (eigenvalue spread)^2"
            )
        log_norm += np.log(r)
        y /= np.sqrt(r)[:, None]
        p /= r[:, None]
        fresh = (p.max(axis=1) >= COLLAPSE_THRESHOLD) & (outcome < 0)
        if fresh.any():
            outcome[fresh] = np.argmax(p[fresh], axis=1)
        if (step + 1) in slots:
            record(slots[step + 1])

    counts = np.bincount(outcome[outcome >= 0], minlength=dim)
    unresolved = int(np.sum(outcome < 0))
    return s1, s2, wsum, log_norm_sum, norm_sum, counts, unresolved


def run_ensemble(
    initial: QuantumState,
    model: CslModel,
    n_traj: int,
    seed: int,
    checkpoints: Sequence[int] | None = None,
    n_workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> EnsembleSummary:
    """Monte Carlo ensemble of physically sampled trajectories.

    ``checkpoints`` are step indices at which the averaged normalized
    projector (the density-matrix estimator) and branch-weight means are
    recorded; they default to 11 evenly spaced steps including 0 and the
    final step.  Trajectory i always draws from stream ``(seed, i)`` and
    chunk boundaries are fixed by ``chunk_size``, so the output is
    bit-identical for every ``n_workers``.
    """
    _require_normalized(initial, model)
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if not model.lam > 0.0:
        raise ValueError("sampling requires lam > 0")
    if checkpoints is None:
        checkpoints = np.unique(
            np.round(np.linspace(0, model.n_steps, 11)).astype(int)
        )
    steps = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=int)
    if steps.size == 0 or steps[0] < 0 or steps[-1] > model.n_steps:
        raise ValueError("checkpoints must lie within [0, n_steps]")
    slots = {int(s): i for i, s in enumerate(steps)}

    ranges = [
        (start, min(chunk_size, n_traj - start))
        for start in range(0, n_traj, chunk_size)
    ]
    y0 = initial.amplitudes

    def work(args):
        start, count = args
        return _chunk_stats(model, y0, seed, start, count, slots)

    if n_workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            partials = list(pool.map(work, ranges))
    else:
        partials = [work(r) for r in ranges]

    dim = model.dim
    s1 = np.zeros((steps.size, dim, dim), dtype=np.complex128)
    s2 = np.zeros((steps.size, dim, dim))
    wsum = np.zeros((steps.size, dim))
    log_norm_sum = np.zeros(steps.size)
    norm_sum = np.zeros(steps.size)
    counts = np.zeros(dim, dtype=np.int64)
    unresolved = 0
    for part in partials:  # fixed chunk order: deterministic reduction
        s1 += part[0]
        s2 += part[1]
        wsum += part[2]
        log_norm_sum += part[3]
        norm_sum += part[4]
        counts += part[5]
        unresolved += part[6]

    rho_mean = s1 / n_traj
    var = np.maximum(s2 / n_traj - np.abs(rho_mean) ** 2, 0.0)
    rho_se = np.sqrt(var / n_traj)
    return EnsembleSummary(
        n_traj=n_traj,
        seed=seed,
        dt=model.dt,
        n_steps=model.n_steps,
        checkpoint_steps=steps,
        branch_eigenvalues=model.eigenvalue_table,
        rho_mean=rho_mean,
        rho_se=rho_se,
        branch_weight_mean=wsum / n_traj,
        mean_log_norm_sq=log_norm_sum / n_traj,
        mean_norm_sq=norm_sum / n_traj,
        outcome_counts=counts,
        unresolved=unresolved,
    )
