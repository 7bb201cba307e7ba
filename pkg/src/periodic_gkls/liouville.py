"""Population/coherence vectorisation and the block generator.

A density operator written in the instantaneous eigenbasis is stored as a
population block (rho_nn) followed by a coherence block (rho_mn, m != n, in
row-major order). The generator acting on that vector splits into the rate
matrix K, the coherence block K2 - i Delta and the gauge-coupling blocks
produced by the rotation of the eigenbasis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .core import (
    DimensionMismatch, Fault, as_square, commutator, dagger, fault_active, frozen,
)
from .dissipator import DissipatorSpec, ThermalDissipator, apply_dissipator, dissipator_superoperator
from .specmat import SpectralDecomposition, eigendecompose, eigenstate_derivative

if TYPE_CHECKING:
    from .protocols import Protocol


@lru_cache(maxsize=None)
def coherence_pairs(n: int) -> tuple[tuple[int, int], ...]:
    return tuple((m, k) for m in range(n) for k in range(n) if m != k)


@lru_cache(maxsize=None)
def _block_order(n: int) -> tuple[int, ...]:
    return tuple(k * n + k for k in range(n)) + tuple(m * n + k for m, k in coherence_pairs(n))


def block_order(n: int) -> np.ndarray:
    """Row-major vec indices listed in (pop, coh) order."""
    return np.array(_block_order(n))


def conjugate_index(n: int) -> np.ndarray:
    """Position of (k, m) in the coherence block for each (m, k)."""
    pairs = coherence_pairs(n)
    where = {p: i for i, p in enumerate(pairs)}
    return np.array([where[(k, m)] for m, k in pairs])


@dataclass(frozen=True, eq=False)
class StateVec:
    pop: np.ndarray
    coh: np.ndarray

    def __post_init__(self):
        pop = np.asarray(self.pop, dtype=complex)
        coh = np.asarray(self.coh, dtype=complex)
        n = pop.shape[0]
        if coh.shape != (n * (n - 1),):
            raise DimensionMismatch(f"{n} populations need {n * (n - 1)} coherences, got {coh.shape}")
        object.__setattr__(self, "pop", frozen(pop))
        object.__setattr__(self, "coh", frozen(coh))

    @property
    def dim(self) -> int:
        return self.pop.shape[0]

    @classmethod
    def from_vector(cls, v: np.ndarray, dim: int) -> "StateVec":
        v = np.asarray(v)
        return cls(v[:dim], v[dim:])

    @classmethod
    def from_matrix(cls, r: np.ndarray) -> "StateVec":
        r = as_square(r)
        n = r.shape[0]
        return cls.from_vector(r.reshape(-1)[block_order(n)], n)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.pop, self.coh])

    def matrix(self) -> np.ndarray:
        """The density matrix in the frame the vector refers to."""
        n = self.dim
        flat = np.zeros(n * n, dtype=complex)
        flat[block_order(n)] = self.as_vector()
        return flat.reshape(n, n)

    def trace_error(self) -> float:
        return abs(complex(self.pop.sum()) - 1.0)

    def conjugation_error(self) -> float:
        if self.dim < 2:
            return 0.0
        return float(np.abs(self.coh - self.coh[conjugate_index(self.dim)].conj()).max())


def vectorize(rho, basis: SpectralDecomposition) -> StateVec:
    rho = as_square(rho, "rho")
    if rho.shape[0] != basis.dim:
        raise DimensionMismatch(f"rho is {rho.shape[0]}-dimensional, basis is {basis.dim}")
    return StateVec.from_matrix(basis.to_frame(rho))


def devectorize(state: StateVec, basis: SpectralDecomposition) -> np.ndarray:
    if state.dim != basis.dim:
        raise DimensionMismatch(f"state is {state.dim}-dimensional, basis is {basis.dim}")
    return basis.from_frame(state.matrix())


def to_block_order(superop: np.ndarray, n: int) -> np.ndarray:
    order = block_order(n)
    return superop[np.ix_(order, order)]


def partition(matrix: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(pop-pop, pop<-coh, coh<-pop, coh-coh) blocks of a (pop, coh)-ordered matrix."""
    return matrix[:n, :n], matrix[:n, n:], matrix[n:, :n], matrix[n:, n:]


def unitary_superoperator(op: np.ndarray, frame: np.ndarray | None = None) -> np.ndarray:
    """Row-major superoperator of -i[op, .]."""
    if frame is not None:
        op = dagger(frame) @ op @ frame
    eye = np.eye(op.shape[0])
    return -1j * (np.kron(op, eye) - np.kron(eye, op.T))


def rotation_superoperator(table: np.ndarray) -> np.ndarray:
    """Row-major superoperator of r -> -[D, r], the moving-frame term."""
    eye = np.eye(table.shape[0])
    return -(np.kron(table, eye) - np.kron(eye, table.T))


@dataclass(frozen=True, eq=False)
class GeneratorBlocks:
    """Blocks of the (pop, coh) generator at one time.

    `a12`, `a21`, `a2` are the gauge couplings as they enter the generator
    (i.e. already contracted with the parameter velocity and multiplied by i).
    `kcoh` is K2 - i Delta; `delta` lists e_m - e_n over the coherence pairs.
    """

    K: np.ndarray
    kcoh: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a2: np.ndarray
    delta: np.ndarray
    time: float
    basis: SpectralDecomposition
    derivatives: np.ndarray

    @property
    def dim(self) -> int:
        return self.K.shape[0]

    @property
    def k2(self) -> np.ndarray:
        return self.kcoh + 1j * np.diag(self.delta)

    def dense(self) -> np.ndarray:
        return np.block([[self.K, self.a12], [self.a21, self.kcoh + self.a2]])


def build_K(d: ThermalDissipator) -> np.ndarray:
    """Classical transition-rate matrix of the projected dissipator."""
    n = d.dim
    k = np.zeros((n, n))
    for gamma, op in d.terms():
        k += gamma * np.abs(d.basis.to_frame(op)) ** 2
    np.fill_diagonal(k, 0.0)
    k -= np.diag(k.sum(axis=0))
    return k


def _drive(path: Protocol, with_cd: bool) -> Protocol:
    if not with_cd:
        return path
    from .counterdiabatic import with_counterdiabatic
    return with_counterdiabatic(path)


def assemble_generator(path: Protocol, t: float, d_config: DissipatorSpec,
                       with_cd: bool = False, fd_step: float | None = None) -> GeneratorBlocks:
    """Block generator at time t.

    With `with_cd` the spectrum, the dissipator projection, Delta and the
    gauge blocks all refer to the eigenbasis of H + H_cd.
    """
    drive = _drive(path, with_cd)
    basis = eigendecompose(drive.hamiltonian(t), time=t)
    table = eigenstate_derivative(drive, t, fd_step, basis=basis)
    diss = d_config.at(basis)
    n = basis.dim

    superop = to_block_order(dissipator_superoperator(diss, basis.eigenvectors), n)
    k2 = partition(superop, n)[3]
    energies = basis.eigenvalues
    delta = np.array([energies[m] - energies[k] for m, k in coherence_pairs(n)])
    if fault_active(Fault.DELTA_SIGN):
        delta = -delta

    rotation = to_block_order(rotation_superoperator(table), n)
    _, a12, a21, a2 = partition(rotation, n)
    return GeneratorBlocks(
        K=frozen(build_K(diss)),
        kcoh=frozen(k2 - 1j * np.diag(delta)),
        a12=frozen(a12),
        a21=frozen(a21),
        a2=frozen(a2),
        delta=frozen(delta),
        time=t,
        basis=basis,
        derivatives=table,
    )


def dense_oracle(path: Protocol, t: float, d_config: DissipatorSpec,
                 with_cd: bool = False, fd_step: float | None = None) -> np.ndarray:
    """Brute-force generator: act on each matrix unit of the eigenframe."""
    drive = _drive(path, with_cd)
    basis = eigendecompose(drive.hamiltonian(t), time=t)
    table = eigenstate_derivative(drive, t, fd_step, basis=basis)
    diss = d_config.at(basis)
    h = drive.hamiltonian(t)
    frame_velocity = 1j * basis.from_frame(table)
    n = basis.dim
    order = block_order(n)

    out = np.zeros((n * n, n * n), dtype=complex)
    for col, idx in enumerate(order):
        unit = np.zeros((n, n), dtype=complex)
        unit[divmod(int(idx), n)] = 1.0
        x = basis.from_frame(unit)
        y = (-1j * commutator(h, x) + apply_dissipator(diss, x)
             + 1j * commutator(frame_velocity, x))
        out[:, col] = basis.to_frame(y).reshape(-1)[order]
    return out


def lab_generator(drive: Protocol, t: float, d_config: DissipatorSpec) -> np.ndarray:
    """Row-major superoperator of -i[H, .] + D_beta in the computational basis."""
    h = drive.hamiltonian(t)
    diss = d_config.at(eigendecompose(h, time=t))
    return unitary_superoperator(h) + dissipator_superoperator(diss)
