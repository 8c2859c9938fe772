"""Finite-dimensional quantum linear algebra.

States, Hermitian operators, density matrices, and simultaneous
diagonalization of commuting operator sets.  Everything is dense: the
target regime is truncated Fock spaces and small lattices (dimension up
to a few hundred), where plain ``numpy.linalg`` is both fastest and
simplest.

All containers are immutable after construction (their arrays are marked
read-only), so they can be shared freely across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

HERMITICITY_RTOL = 1e-12
UNITARITY_TOL = 1e-10
STATE_NORM_TOL = 1e-12
COMMUTATOR_TOL = 1e-10

__all__ = [
    "QuantumState",
    "HermitianOperator",
    "DensityMatrix",
    "JointEigenbasis",
    "expectation",
    "eigendecompose",
    "joint_eigenbasis",
    "commutator_maxabs",
]


def _frozen_array(values, dtype) -> np.ndarray:
    out = np.array(values, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _fix_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column's global phase so its first nonzero entry is
    positive real.  Makes eigenbases reproducible across runs."""
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if idx.size:
            pivot = col[idx[0]]
            vectors[:, j] = col * (np.conj(pivot) / abs(pivot))
    return vectors


@dataclass(frozen=True)
class QuantumState:
    """Complex amplitude vector over a finite labeled basis.

    ``normalized=True`` asserts unit norm at construction.  States produced
    by the non-unitary collapse evolution are unnormalized and carry their
    norm explicitly through :attr:`norm_sq`.
    """

    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        amps = _frozen_array(self.amplitudes, np.complex128)
        if amps.ndim != 1 or amps.size < 1:
            raise ValueError("amplitudes must be a non-empty 1-d vector")
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized:
            nsq = float(np.sum(np.abs(amps) ** 2))
            if abs(nsq - 1.0) > STATE_NORM_TOL:
                raise ValueError(
                    f"state flagged normalized has squared norm {nsq!r}"
                )

    @property
    def basis_dim(self) -> int:
        return self.amplitudes.size

    @cached_property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def normalize(self) -> "QuantumState":
        nsq = self.norm_sq
        if nsq <= 0.0:
            raise ValueError("cannot normalize a zero-norm state")
        return QuantumState(self.amplitudes / np.sqrt(nsq), normalized=True)


class HermitianOperator:
    """Dense Hermitian matrix with a lazily computed eigendecomposition.

    Hermiticity is validated at construction (entrywise deviation at most
    ``1e-12`` relative to the largest entry) and the stored matrix is the
    exactly symmetrized average, which keeps downstream eigensolves
    deterministic.
    """

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.complex128, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError("matrix must be square and non-empty")
        scale = float(np.abs(m).max())
        dev = float(np.abs(m - m.conj().T).max())
        if dev > HERMITICITY_RTOL * max(scale, 1e-300):
            raise ValueError(f"matrix is not Hermitian (deviation {dev:g})")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        self.matrix = m
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _ensure_eig(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            vals, vecs = np.linalg.eigh(self.matrix)
            vecs = _fix_eigenvector_signs(vecs)
            vals = _frozen_array(vals, np.float64)
            vecs = _frozen_array(vecs, np.complex128)
            self._eig = (vals, vecs)
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._ensure_eig()[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._ensure_eig()[1]

    @cached_property
    def spectral_norm(self) -> float:
        return float(np.abs(self.eigenvalues).max())

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        return self.matrix @ amplitudes


class DensityMatrix:
    """Dense positive-semidefinite unit-trace complex matrix.

    Construction validates trace (within 1e-9 of 1), Hermiticity (1e-10)
    and numerical positivity (smallest eigenvalue >= -1e-8).
    """

    TRACE_TOL = 1e-9
    HERM_TOL = 1e-10
    PSD_FLOOR = -1e-8

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.complex128, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > self.TRACE_TOL:
            raise ValueError(f"trace {tr!r} deviates from 1 beyond tolerance")
        scale = max(float(np.abs(m).max()), 1.0)
        if float(np.abs(m - m.conj().T).max()) > self.HERM_TOL * scale:
            raise ValueError("density matrix is not Hermitian to tolerance")
        m = 0.5 * (m + m.conj().T)
        min_eig = float(np.linalg.eigvalsh(m).min())
        if min_eig < self.PSD_FLOOR:
            raise ValueError(f"density matrix has eigenvalue {min_eig:g} < {self.PSD_FLOOR:g}")
        m.setflags(write=False)
        self.matrix = m
        self.min_eigenvalue = min_eig

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_state(cls, state: QuantumState) -> "DensityMatrix":
        psi = state.amplitudes
        nsq = state.norm_sq
        if nsq <= 0.0:
            raise ValueError("cannot build a density matrix from a zero-norm state")
        return cls(np.outer(psi, psi.conj()) / nsq)


def expectation(state: QuantumState, op: HermitianOperator) -> float:
    """Normalized expectation value ``<psi|Op|psi> / <psi|psi>``.

    Always real for Hermitian ``op``; the imaginary residue is discarded.
    """
    if state.basis_dim != op.dim:
        raise ValueError(
            f"dimension mismatch: state {state.basis_dim}, operator {op.dim}"
        )
    nsq = state.norm_sq
    if nsq <= 0.0:
        raise ValueError("expectation of a zero-norm state is undefined")
    value = np.vdot(state.amplitudes, op.matrix @ state.amplitudes) / nsq
    return float(value.real)


def eigendecompose(op: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and a unitary eigenvector matrix of ``op``.

    Satisfies ``op = U diag(e) U^dagger`` to 1e-10 relative; column phases
    follow the first-nonzero-positive-real convention.
    """
    return op.eigenvalues, op.eigenvectors


def commutator_maxabs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a @ b - b @ a).max())


@dataclass(frozen=True)
class JointEigenbasis:
    """Simultaneous eigenbasis of a set of mutually commuting Hermitian
    operators.

    ``vectors`` holds the common eigenvectors as columns; ``eigenvalues``
    is the (dim, n_ops) table of per-operator eigenvalues along the shared
    basis, so row n is the joint eigenvalue vector of branch n.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", _frozen_array(self.vectors, np.complex128))
        object.__setattr__(self, "eigenvalues", _frozen_array(self.eigenvalues, np.float64))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_ops(self) -> int:
        return self.eigenvalues.shape[1]

    def to_eigenbasis(self, amplitudes: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ amplitudes

    def from_eigenbasis(self, coeffs: np.ndarray) -> np.ndarray:
        return self.vectors @ coeffs

    def branch_weights(self, state: QuantumState) -> np.ndarray:
        """Normalized weights ``|<a_n|psi>|^2 / <psi|psi>`` per branch."""
        coeffs = self.to_eigenbasis(state.amplitudes)
        w = np.abs(coeffs) ** 2
        total = w.sum()
        if total <= 0.0:
            raise ValueError("zero-norm state has no branch weights")
        return w / total


def joint_eigenbasis(
    ops: Sequence[HermitianOperator],
    commutator_tol: float = COMMUTATOR_TOL,
    degeneracy_tol: float = 1e-8,
) -> JointEigenbasis:
    """Simultaneously diagonalize mutually commuting Hermitian operators.

    Uses recursive block diagonalization: diagonalize the first operator,
    then refine each degenerate eigenspace with the next operator, and so
    on.  Raises ``ValueError`` when any pair fails the commutator check.
    """
    if not ops:
        raise ValueError("need at least one operator")
    dim = ops[0].dim
    mats = []
    for op in ops:
        if op.dim != dim:
            raise ValueError("operators must share one dimension")
        mats.append(op.matrix)
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            scale = max(np.abs(mats[i]).max() * np.abs(mats[j]).max(), 1.0)
            dev = commutator_maxabs(mats[i], mats[j])
            if dev > commutator_tol * scale:
                raise ValueError(
                    f"operators {i} and {j} do not commute (deviation {dev:g})"
                )

    vectors = np.eye(dim, dtype=np.complex128)
    blocks: list[np.ndarray] = [np.arange(dim)]
    for mat in mats:
        scale = max(float(np.abs(mat).max()), 1.0)
        new_blocks: list[np.ndarray] = []
        for blk in blocks:
            sub = vectors[:, blk].conj().T @ mat @ vectors[:, blk]
            vals, vecs = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            vectors[:, blk] = vectors[:, blk] @ vecs
            # split the block wherever the eigenvalue jumps
            start = 0
            for k in range(1, blk.size):
                if vals[k] - vals[k - 1] > degeneracy_tol * scale:
                    new_blocks.append(blk[start:k])
                    start = k
            new_blocks.append(blk[start:])
        blocks = new_blocks

    vectors = _fix_eigenvector_signs(vectors)
    table = np.empty((dim, len(mats)), dtype=np.float64)
    for k, mat in enumerate(mats):
        rotated = vectors.conj().T @ mat @ vectors
        resid = float(np.abs(rotated - np.diag(np.diagonal(rotated))).max())
        scale = max(float(np.abs(mat).max()), 1.0)
        if resid > 1e-9 * scale:
            raise ValueError(
                f"joint diagonalization failed for operator {k} (residual {resid:g})"
            )
        table[:, k] = np.diagonal(rotated).real
    return JointEigenbasis(vectors=vectors, eigenvalues=table)
