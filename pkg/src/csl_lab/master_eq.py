"""Deterministic density-matrix evolution.

Integrates the collapse master equation

    d rho/dt = -i [H, rho] - (lam/2) sum_k [A_k, [A_k, rho]]

with a fixed-step classical 4th-order Runge-Kutta scheme.  The double
commutator is evaluated densely in general; when every collapse operator
is diagonal in the working basis the dissipator reduces to an elementwise
damping ``-Gamma_ij * rho_ij`` with
``Gamma_ij = (lam/2) sum_k (f_k(i) - f_k(j))^2``, which is algebraically
identical and O(d^2) per evaluation.  Hermiticity is enforced by
symmetrization every step; trace and positivity are monitored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .csvio import write_csv
from .hilbert import DensityMatrix, HermitianOperator

__all__ = [
    "LindbladModel",
    "MasterTrajectory",
    "StepSizeError",
    "PositivityError",
    "lindblad_rhs",
    "integrate_master",
    "analytic_offdiag",
]

STEP_RULE_LIMIT = 0.1
PSD_MONITOR_FLOOR = -1e-6
TRACE_DRIFT_TOL = 1e-9


class StepSizeError(ValueError):
    """dt violates the step rule dt*(||H|| + lam*max||A||^2) <= 0.1."""


class PositivityError(RuntimeError):
    """Integration produced an eigenvalue below the -1e-6 monitor floor
    (usually a sign that dt is too large)."""


class LindbladModel:
    """Hamiltonian, collapse channels and rate for the master equation.

    Collapse operators here need not commute (the double commutator is
    well-defined regardless), though commuting sets are the regime
    validated against the stochastic unraveling.
    """

    def __init__(
        self,
        hamiltonian: HermitianOperator | None,
        collapse_ops: Sequence[HermitianOperator],
        lam: float,
    ):
        if lam < 0.0:
            raise ValueError("lam must be non-negative")
        self.hamiltonian = hamiltonian
        self.collapse_ops = tuple(collapse_ops)
        self.lam = float(lam)
        dims = {op.dim for op in self.collapse_ops}
        if hamiltonian is not None:
            dims.add(hamiltonian.dim)
        if len(dims) > 1:
            raise ValueError("all operators must share one dimension")
        if not dims:
            raise ValueError("model needs a Hamiltonian or collapse operators")
        self.dim = dims.pop()

        self._h = None if hamiltonian is None else hamiltonian.matrix
        self._a_list = [op.matrix for op in self.collapse_ops]
        self._a_sq = [a @ a for a in self._a_list]
        # elementwise fast path when every channel is diagonal as given
        self._damping = None
        if self._a_list and all(
            np.abs(a - np.diag(np.diagonal(a))).max()
            <= 1e-14 * max(np.abs(a).max(), 1e-300)
            for a in self._a_list
        ):
            gamma = np.zeros((self.dim, self.dim))
            for a in self._a_list:
                f = np.diagonal(a).real
                gamma += (f[:, None] - f[None, :]) ** 2
            self._damping = 0.5 * self.lam * gamma

    @property
    def step_rule_scale(self) -> float:
        scale = 0.0 if self.hamiltonian is None else self.hamiltonian.spectral_norm
        if self.collapse_ops and self.lam > 0.0:
            scale += self.lam * max(op.spectral_norm for op in self.collapse_ops) ** 2
        return scale

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho)
        if self._h is not None:
            out += -1j * (self._h @ rho - rho @ self._h)
        if self.lam > 0.0 and self._a_list:
            if self._damping is not None:
                out -= self._damping * rho
            else:
                half = 0.5 * self.lam
                for a, a2 in zip(self._a_list, self._a_sq):
                    out -= half * (a2 @ rho - 2.0 * (a @ rho @ a) + rho @ a2)
        return out

    def rk4_step(self, rho: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.rhs(rho)
        k2 = self.rhs(rho + 0.5 * dt * k1)
        k3 = self.rhs(rho + 0.5 * dt * k2)
        k4 = self.rhs(rho + dt * k3)
        out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return 0.5 * (out + out.conj().T)


def lindblad_rhs(rho, model: LindbladModel) -> np.ndarray:
    """Right-hand side of the master equation at ``rho``.

    Accepts a ``DensityMatrix`` or a raw array; the result is Hermitian
    and traceless (trace magnitude below 1e-12 relative).
    """
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    if mat.shape != (model.dim, model.dim):
        raise ValueError("density matrix dimension does not match the model")
    return model.rhs(mat)


@dataclass(frozen=True)
class MasterTrajectory:
    """Density-matrix trajectory at recorded times."""

    times: np.ndarray
    matrices: list[DensityMatrix]

    def __iter__(self):
        return iter(zip(self.times, self.matrices))

    @property
    def final(self) -> DensityMatrix:
        return self.matrices[-1]

    def write_csv(self, path) -> None:
        rows = []
        for t, rho in zip(self.times, self.matrices):
            m = rho.matrix
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    rows.append((t, i, j, m[i, j].real, m[i, j].imag))
        write_csv(path, ["time", "row", "col", "re", "im"], rows)


def integrate_master(
    rho0: DensityMatrix,
    model: LindbladModel,
    t_final: float,
    dt: float,
    record_times: Sequence[float] | None = None,
) -> MasterTrajectory:
    """Fixed-step RK4 integration of the master equation.

    ``dt`` must satisfy ``dt * (||H|| + lam * max||A||^2) <= 0.1``; the
    actual step is ``t_final`` divided into equal steps no larger than
    ``dt``.  ``record_times`` must lie on the resulting step grid (the
    default records ~100 evenly spaced points plus the endpoints).  Trace
    drift beyond 1e-9 or an eigenvalue below -1e-6 at a recorded point
    aborts the run.
    """
    if rho0.dim != model.dim:
        raise ValueError("initial density matrix dimension mismatch")
    if not t_final >= 0.0:
        raise ValueError("t_final must be non-negative")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    scale = model.step_rule_scale
    if dt * scale > STEP_RULE_LIMIT * (1.0 + 1e-12):
        raise StepSizeError(
            f"dt*(||H|| + lam*max||A||^2) = {dt * scale:g} exceeds {STEP_RULE_LIMIT}"
        )
    if t_final == 0.0:
        return MasterTrajectory(times=np.array([0.0]), matrices=[rho0])

    ratio = t_final / dt
    if abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio):
        n_steps = max(1, int(round(ratio)))  # dt already divides t_final
    else:
        n_steps = int(np.ceil(ratio))
    h = t_final / n_steps

    if record_times is None:
        stride = max(1, n_steps // 100)
        record_steps = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    else:
        record_steps = []
        for t in record_times:
            k = int(round(t / h))
            if k < 0 or k > n_steps or abs(k * h - t) > 1e-9 * max(1.0, abs(t)):
                raise ValueError(
                    f"record time {t!r} does not lie on the step grid (h={h!r})"
                )
            record_steps.append(k)
        record_steps = sorted(set(record_steps))

    wanted = set(record_steps)
    times = []
    matrices = []
    rho = rho0.matrix.copy()

    def record(step, mat):
        tr = float(np.trace(mat).real)
        if abs(tr - 1.0) > TRACE_DRIFT_TOL:
            raise RuntimeError(f"trace drifted to {tr!r} at step {step}")
        min_eig = float(np.linalg.eigvalsh(mat).min())
        if min_eig < PSD_MONITOR_FLOOR:
            raise PositivityError(
                f"eigenvalue {min_eig:g} below {PSD_MONITOR_FLOOR:g} at t={step * h:g}; "
                "reduce dt"
            )
        times.append(step * h)
        matrices.append(DensityMatrix(mat))

    if 0 in wanted:
        record(0, rho)
    for step in range(1, n_steps + 1):
        rho = model.rk4_step(rho, h)
        if step in wanted:
            record(step, rho)
    return MasterTrajectory(times=np.asarray(times), matrices=matrices)


def analytic_offdiag(c_n, c_m, a_n, a_m, lam: float, t: float) -> complex:
    """Closed-form two-level coherence ``c_n c_m* exp(-(lam t/2)(a_n-a_m)^2)``
    for pure collapse dynamics (H = 0)."""
    return complex(c_n) * np.conj(c_m) * np.exp(-0.5 * lam * t * (a_n - a_m) ** 2)
