"""Discretized white-noise records and exact sampling under the collapse
probability rule.

Conditioned on the current normalized state, the noise vector of one time
step is distributed as a Gaussian mixture with one component per joint
eigenvalue branch of the collapse operators: component weight
``|<a_n|psi>|^2``, per-channel mean ``2*lam*a_n(k)`` and per-channel
variance ``lam/dt``.  Sampling the branch first and then the Gaussian is an
exact draw from that mixture, which is what makes whole trajectories
distributed proportionally to the squared norm of the linearly evolved
state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .csvio import write_csv
from .hilbert import JointEigenbasis, QuantumState

__all__ = [
    "NoiseTrajectory",
    "SeededRng",
    "sample_physical_noise_step",
    "raw_measure_log_weight",
    "time_average",
]

_UINT64_MASK = (1 << 64) - 1


class SeededRng:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Wraps a Philox generator, so identical keys replay identical sample
    sequences bit-for-bit on every platform and under any thread schedule.
    Stream ids are conventionally the trajectory index.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _UINT64_MASK
        self.stream_id = int(stream_id) & _UINT64_MASK
        self._gen = Generator(
            Philox(key=np.array([self.seed, self.stream_id], dtype=np.uint64))
        )

    def random(self, size=None):
        return self._gen.random(size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def replay(self) -> "SeededRng":
        return SeededRng(self.seed, self.stream_id)


@dataclass(frozen=True)
class NoiseTrajectory:
    """Per-step noise samples ``w_k(n*dt)``, one column per channel."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError("samples must have shape (n_steps, n_channels)")
        if not np.all(np.isfinite(samples)):
            raise ValueError("noise samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def write_csv(self, path) -> None:
        rows = []
        for step in range(self.n_steps):
            t = step * self.dt
            for ch in range(self.n_channels):
                rows.append((step, t, ch, self.samples[step, ch]))
        write_csv(path, ["step", "time", "channel", "w"], rows)


def sample_physical_noise_step(
    state: QuantumState,
    joint_basis: JointEigenbasis,
    lam: float,
    dt: float,
    rng: SeededRng,
) -> tuple[np.ndarray, int]:
    """Draw one step of physical noise conditioned on ``state``.

    Returns the per-channel noise vector and the branch (joint eigenvalue
    index) that the mixture draw selected.  Requires a normalized state
    and a strictly positive collapse rate.
    """
    if not lam > 0.0:
        raise ValueError("collapse rate lam must be positive for sampling")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if state.basis_dim != joint_basis.dim:
        raise ValueError("state and eigenbasis dimensions differ")
    if abs(state.norm_sq - 1.0) > 1e-9:
        raise ValueError("sampling requires a normalized state")
    weights = joint_basis.branch_weights(state)
    u = float(rng.random())
    z = rng.standard_normal(joint_basis.n_ops)
    branch, w = _mixture_draw(weights, joint_basis.eigenvalues, lam, dt, u, z)
    return w, branch


def _mixture_draw(weights, eigenvalue_table, lam, dt, u, z):
    """Shared mixture transform: uniform -> branch, normals -> noise."""
    cum = np.cumsum(weights)
    branch = int(np.searchsorted(cum, u * cum[-1], side="right"))
    branch = min(branch, weights.size - 1)
    w = 2.0 * lam * eigenvalue_table[branch] + math.sqrt(lam / dt) * z
    return branch, w


def raw_measure_log_weight(traj: NoiseTrajectory, lam: float) -> float:
    """Log of the Gaussian measure normalization for a whole record.

    The discretized noise measure carries one factor ``(2*pi*lam/dt)^(-1/2)``
    per sample (per step and channel); this returns the log of their
    product, ``-(n_steps*n_channels)/2 * log(2*pi*lam/dt)``.
    """
    if not lam > 0.0:
        raise ValueError("lam must be positive")
    n = traj.n_steps * traj.n_channels
    return -0.5 * n * math.log(2.0 * math.pi * lam / traj.dt)


def time_average(traj: NoiseTrajectory, channel: int) -> float:
    """Arithmetic mean of one channel; classifies which collapse outcome a
    noise record encodes (it converges to ``2*lam*a_n`` on branch n)."""
    if not 0 <= channel < traj.n_channels:
        raise ValueError(f"channel {channel} out of range")
    return float(traj.samples[:, channel].mean())
