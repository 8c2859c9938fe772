"""Universe-creation toy model: displaced oscillators driven from vacuum.

Each of V identical cells carries one bosonic mode with Hamiltonian
``H = m n + g (xi + xi^dagger)`` acting on the vacuum for a time T, with
the cell's particle number as the collapse channel at rate ``lam``.  Cells
evolve as independent copies, so the total mean particle number is V times
the single-cell value.

Without collapse the state stays coherent with amplitude
``alpha(T) = -(g/m)(1 - exp(-i m T))`` and the mean number oscillates as
``2 V (g/m)^2 (1 - cos mT)``.  With collapse the first two moments close
exactly:

    d<xi>/dt = -(i m + lam/2) <xi> - i g
    d<n>/dt  = -2 g Im <xi>

whose solution in closed form is :func:`mean_n_csl`; the independent
numerical integration of the same system is :func:`moment_ode_oracle`.
For large ``lam`` the mean number is suppressed toward zero: collapse
checks the mode so often that the drive never builds amplitude (quantum
Zeno behavior).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .hilbert import DensityMatrix, HermitianOperator, QuantumState
from .master_eq import STEP_RULE_LIMIT, LindbladModel, integrate_master

__all__ = [
    "CosmoParams",
    "TruncationError",
    "ladder_operator",
    "number_operator",
    "cell_hamiltonian",
    "coherent_solution",
    "mean_n_schrodinger",
    "mean_n_csl",
    "mean_n_numerical",
    "moment_ode_oracle",
    "build_cell_model",
    "build_two_cell_model",
]

TOP_OCCUPANCY_TOL = 1e-8


class TruncationError(RuntimeError):
    """The truncated Fock space is too small for the requested evolution."""


@dataclass(frozen=True)
class CosmoParams:
    """Model parameters: mode mass/frequency m, drive g, cell count V,
    collapse rate lam, drive duration T, Fock truncation n_max."""

    m: float
    g: float
    V: int = 1
    lam: float = 0.0
    T: float = 0.0
    n_max: int = 16

    def __post_init__(self):
        if not self.m > 0.0:
            raise ValueError("m must be positive")
        if self.V < 1 or self.n_max < 1:
            raise ValueError("V and n_max must be at least 1")
        if self.lam < 0.0 or self.T < 0.0:
            raise ValueError("lam and T must be non-negative")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def at_time(self, T: float) -> "CosmoParams":
        return replace(self, T=T)


def ladder_operator(n_max: int) -> np.ndarray:
    """Annihilation operator on the truncated Fock space {|0>..|n_max>}."""
    dim = n_max + 1
    a = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(1, dim):
        a[n - 1, n] = math.sqrt(n)
    return a


def number_operator(n_max: int) -> HermitianOperator:
    return HermitianOperator(np.diag(np.arange(n_max + 1, dtype=np.float64)))


def cell_hamiltonian(params: CosmoParams) -> HermitianOperator:
    a = ladder_operator(params.n_max)
    n = np.diag(np.arange(params.n_max + 1, dtype=np.float64))
    return HermitianOperator(params.m * n + params.g * (a + a.conj().T))


def coherent_amplitude(params: CosmoParams) -> complex:
    """Driven-mode coherent amplitude ``alpha(T) = -(g/m)(1 - e^{-i m T})``."""
    return -(params.g / params.m) * (1.0 - np.exp(-1j * params.m * params.T))


def coherent_solution(params: CosmoParams) -> QuantumState:
    """Collapse-free solution at time T: a truncated coherent state.

    Amplitudes carry the accumulated global phase ``exp(i T g^2 V / m)``;
    occupancies are Poisson with mean ``|alpha|^2`` up to the truncation.
    """
    alpha = coherent_amplitude(params)
    occupancy = abs(alpha) ** 2
    if occupancy > 0.5 * params.n_max:
        raise TruncationError(
            f"|alpha|^2 = {occupancy:g} is not small against n_max = {params.n_max}"
        )
    n = np.arange(params.dim)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, params.dim)))))
    with np.errstate(divide="ignore"):
        log_mag = np.where(n > 0, n * np.log(np.maximum(abs(alpha), 1e-300)), 0.0)
    amps = np.exp(log_mag - 0.5 * log_fact) * np.exp(1j * n * np.angle(alpha))
    if abs(alpha) == 0.0:
        amps = np.zeros(params.dim, dtype=np.complex128)
        amps[0] = 1.0
    amps = amps / np.linalg.norm(amps)
    phase = np.exp(1j * params.T * params.g**2 * params.V / params.m)
    return QuantumState(amps * phase, normalized=True)


def mean_n_schrodinger(params: CosmoParams) -> float:
    """Collapse-free mean total particle number ``2V(g/m)^2 (1 - cos mT)``."""
    return 2.0 * params.V * (params.g / params.m) ** 2 * (1.0 - math.cos(params.m * params.T))


def mean_n_csl(params: CosmoParams) -> float:
    """Closed-form mean total particle number with collapse at rate lam.

    Exact solution of the two-moment system; continuous in lam at 0, where
    it reduces to the collapse-free oscillation.  For large lam T it grows
    linearly with slope ``lam g^2 V / (m^2 + (lam/2)^2)``.
    """
    m, g, lam, T = params.m, params.g, params.lam, params.T
    theta = 2.0 * math.atan2(2.0 * m, lam)
    pref = g * g * params.V / (m * m + 0.25 * lam * lam)
    braces = lam * T - 2.0 * (
        math.cos(theta) - math.exp(-0.5 * lam * T) * math.cos(theta + m * T)
    )
    return pref * braces


def build_cell_model(params: CosmoParams) -> tuple[LindbladModel, HermitianOperator]:
    """Single-cell master-equation model (collapse channel = cell number)."""
    n_op = number_operator(params.n_max)
    return LindbladModel(cell_hamiltonian(params), [n_op], params.lam), n_op


def build_two_cell_model(params: CosmoParams) -> tuple[LindbladModel, HermitianOperator]:
    """Two-cell tensor-product model used to verify cell independence."""
    dim = params.dim
    eye = np.eye(dim)
    a = ladder_operator(params.n_max)
    n1 = np.diag(np.arange(dim, dtype=np.float64))
    h1 = params.m * n1 + params.g * (a + a.conj().T)
    h = np.kron(h1, eye) + np.kron(eye, h1)
    channels = [
        HermitianOperator(np.kron(n1, eye)),
        HermitianOperator(np.kron(eye, n1)),
    ]
    total_n = HermitianOperator(np.kron(n1, eye) + np.kron(eye, n1))
    return LindbladModel(HermitianOperator(h), channels, params.lam), total_n


def _snap_record_times(times, t_final, h):
    steps = []
    for t in times:
        k = int(round(t / h))
        k = min(max(k, 0), int(round(t_final / h)))
        steps.append(k)
    return sorted(set(steps))


def mean_n_numerical(
    params: CosmoParams,
    record_times: Sequence[float] | None = None,
    dt: float | None = None,
    rule_fraction: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean particle number from the truncated-Fock master equation.

    Integrates one cell and multiplies by V (cells are exact independent
    copies).  Requested record times are snapped to the integrator's step
    grid; the actual times are returned alongside the values.  Raises
    ``TruncationError`` when the top Fock level acquires occupancy above
    1e-8 at any recorded time.  ``rule_fraction`` shrinks the default step
    below the step-rule bound for extra accuracy.
    """
    model, n_op = build_cell_model(params)
    if dt is None:
        dt = 0.99 * rule_fraction * STEP_RULE_LIMIT / model.step_rule_scale
    t_final = params.T
    if record_times is None:
        record_times = np.linspace(0.0, t_final, 81) if t_final > 0 else [0.0]
    if t_final == 0.0:
        return np.array([0.0]), np.array([0.0])
    n_steps = int(np.ceil(t_final / dt - 1e-12))
    h = t_final / n_steps
    steps = _snap_record_times(record_times, t_final, h)
    times = [k * h for k in steps]

    rho0 = np.zeros((params.dim, params.dim), dtype=np.complex128)
    rho0[0, 0] = 1.0
    traj = integrate_master(DensityMatrix(rho0), model, t_final, h, record_times=times)
    values = []
    for rho in traj.matrices:
        top = float(rho.matrix[params.n_max, params.n_max].real)
        if top > TOP_OCCUPANCY_TOL:
            raise TruncationError(
                f"top Fock level occupancy {top:g} exceeds {TOP_OCCUPANCY_TOL:g}; "
                "increase n_max"
            )
        values.append(params.V * float(np.trace(n_op.matrix @ rho.matrix).real))
    return traj.times, np.asarray(values)


def moment_ode_oracle(
    params: CosmoParams, record_times: Sequence[float] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Independent check: integrate the closed two-moment system numerically.

    Uses an adaptive high-order solver at tight tolerance, a fully separate
    code path from both the closed form and the dense master integrator.
    """
    m, g, lam = params.m, params.g, params.lam
    if record_times is None:
        record_times = np.linspace(0.0, params.T, 201) if params.T > 0 else [0.0]
    times = np.asarray(sorted(set(float(t) for t in record_times)))
    if params.T == 0.0 or times[-1] == 0.0:
        return times, np.zeros_like(times)

    def rhs(_t, y):
        xr, xi, n = y
        return [
            -0.5 * lam * xr + m * xi,
            -0.5 * lam * xi - m * xr - g,
            -2.0 * g * xi,
        ]

    sol = solve_ivp(
        rhs,
        (0.0, float(times[-1])),
        [0.0, 0.0, 0.0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        t_eval=times,
    )
    if not sol.success:
        raise RuntimeError(f"moment ODE integration failed: {sol.message}")
    return times, params.V * sol.y[2]


def moment_fixed_point(params: CosmoParams) -> complex:
    """Long-time limit of the cell amplitude, ``-i g / (i m + lam/2)``."""
    return -1j * params.g / (1j * params.m + 0.5 * params.lam)
