"""Dense Hermitian-operator toolkit.

Eigendecomposition by cyclic Jacobi rotations, phase (gauge) tracking of
eigenvectors along a parameter path, finite-difference eigenstate
derivatives and the trace-distance metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .core import (
    DegenerateSpectrum, DimensionMismatch, GKLSError, InvalidDensityMatrix,
    NotHermitian, PathDiscontinuity, as_square, check_same_dim, dagger, frozen,
    max_abs,
)

if TYPE_CHECKING:
    from .protocols import Protocol

DEGENERACY_TOL = 1e-8
HERMITIAN_TOL = 1e-12
MIN_OVERLAP = 0.5


def hermitian(matrix, atol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a Hermitian operator and return a read-only copy."""
    a = as_square(matrix, "operator")
    if a.shape[0] < 1:
        raise DimensionMismatch("operator must have dimension >= 1")
    if max_abs(a - dagger(a)) > atol * max(1.0, max_abs(a)):
        raise NotHermitian(f"operator is not Hermitian (residual {max_abs(a - dagger(a)):.3e})")
    return frozen(0.5 * (a + dagger(a)))


def density_matrix(matrix, atol: float = 1e-9) -> np.ndarray:
    """Validate a density operator: Hermitian, unit trace, positive."""
    rho = as_square(matrix, "density matrix")
    if max_abs(rho - dagger(rho)) > 1e-10:
        raise InvalidDensityMatrix("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise InvalidDensityMatrix(f"trace is {np.trace(rho).real:.12g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise InvalidDensityMatrix("density matrix has a negative eigenvalue")
    return frozen(rho)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues (ascending) and column eigenvectors of a Hermitian operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", frozen(np.asarray(self.eigenvalues, dtype=float)))
        object.__setattr__(self, "eigenvectors", frozen(np.asarray(self.eigenvectors, dtype=complex)))
        n = self.eigenvalues.shape[0]
        if self.eigenvectors.shape != (n, n):
            raise DimensionMismatch(
                f"{n} eigenvalues but eigenvector matrix of shape {self.eigenvectors.shape}")

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return v @ np.diag(self.eigenvalues) @ dagger(v)

    def to_frame(self, op: np.ndarray) -> np.ndarray:
        """Matrix elements <e_m|op|e_n>."""
        return dagger(self.eigenvectors) @ op @ self.eigenvectors

    def from_frame(self, m: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ m @ dagger(self.eigenvectors)

    def min_gap(self) -> float:
        return float(np.diff(self.eigenvalues).min()) if self.dim > 1 else float("inf")


def _rotation(app: float, aqq: float, apq: complex, p: int, q: int, n: int) -> np.ndarray:
    """Unitary zeroing the (p, q) element of a Hermitian matrix."""
    r = abs(apq)
    phase = apq / r
    theta = (aqq - app) / (2.0 * r)
    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    g = np.eye(n, dtype=complex)
    g[p, p] = c
    g[p, q] = s
    g[q, p] = -s * np.conj(phase)
    g[q, q] = c * np.conj(phase)
    return g


def jacobi_eigh(matrix, tol: float = 1e-14, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for small Hermitian matrices.

    Returns ascending eigenvalues and the matching column eigenvectors.
    No degeneracy check is made here.
    """
    a = as_square(matrix).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-3 * tol * scale:
                    continue
                g = _rotation(a[p, p].real, a[q, q].real, a[p, q], p, q, n)
                a = dagger(g) @ a @ g
                v = v @ g
    else:
        raise GKLSError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    values = np.real(np.diag(a))
    order = np.argsort(values, kind="stable")
    return values[order], v[:, order]


def eigendecompose(h, time: float = 0.0,
                   degeneracy_tol: float = DEGENERACY_TOL) -> SpectralDecomposition:
    """Spectral decomposition of a nondegenerate Hermitian operator."""
    values, vectors = jacobi_eigh(hermitian(h))
    dec = SpectralDecomposition(values, vectors, time)
    if dec.dim > 1:
        span = values[-1] - values[0]
        if span <= 1e-12 * max(1.0, float(np.abs(values).max())):
            raise DegenerateSpectrum("operator is proportional to the identity")
        gap = dec.min_gap()
        if gap < degeneracy_tol * span:
            raise DegenerateSpectrum(
                f"eigenvalue gap {gap:.3e} below tolerance {degeneracy_tol * span:.3e}")
    return dec


def gauge_align(prev: SpectralDecomposition, cur: SpectralDecomposition) -> SpectralDecomposition:
    """Match `cur` to `prev` by maximal overlap and remove relative phases.

    After alignment every overlap <prev_n|cur_n> is real and positive.
    """
    if prev.dim != cur.dim:
        raise DimensionMismatch(f"dimension mismatch: {prev.dim} vs {cur.dim}")
    overlap = dagger(prev.eigenvectors) @ cur.eigenvectors
    modulus = np.abs(overlap)
    match = modulus.argmax(axis=1)
    rows = np.arange(prev.dim)
    if len(set(match.tolist())) != prev.dim or modulus[rows, match].min() <= MIN_OVERLAP:
        raise PathDiscontinuity(
            f"eigenvectors at t={cur.time:.6g} do not continue those at t={prev.time:.6g} "
            f"(min overlap {modulus[rows, match].min():.3f})")
    phases = overlap[rows, match] / modulus[rows, match]
    vectors = cur.eigenvectors[:, match] * np.conj(phases)[None, :]
    return SpectralDecomposition(cur.eigenvalues[match], vectors, cur.time)


def eigenstate_derivative(path: Protocol, t: float, fd_step: float | None = None,
                          basis: SpectralDecomposition | None = None) -> np.ndarray:
    """Table of <e_m|d/dt e_n> in the parallel-transport gauge.

    Central difference of gauge-aligned eigenvectors, projected onto its
    anti-Hermitian part. `basis` may be passed to reuse the decomposition
    at `t`.
    """
    step = path.default_fd_step() if fd_step is None else fd_step
    if step <= 0:
        raise ValueError(f"fd_step must be positive, got {step}")
    mid = basis if basis is not None else eigendecompose(path.hamiltonian(t), time=t)
    fwd = gauge_align(mid, eigendecompose(path.hamiltonian(t + step), time=t + step))
    bwd = gauge_align(mid, eigendecompose(path.hamiltonian(t - step), time=t - step))
    table = dagger(mid.eigenvectors) @ (fwd.eigenvectors - bwd.eigenvectors) / (2.0 * step)
    return frozen(0.5 * (table - dagger(table)))


def trace_distance(a, b) -> float:
    """(1/2) Tr|a - b| for two density matrices."""
    a = as_square(a, "a")
    b = as_square(b, "b")
    check_same_dim(a, b)
    diff = a - b
    mu = np.linalg.eigvalsh(0.5 * (diff + dagger(diff)))
    return float(min(1.0, 0.5 * np.abs(mu).sum()))
