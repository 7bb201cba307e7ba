"""Adiabatic gauge potential and the counterdiabatic drive."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, Fault, dagger, fault_active, frozen
from .liouville import StateVec
from .protocols import BlochProtocol, Protocol
from .specmat import SpectralDecomposition, eigendecompose, eigenstate_derivative, hermitian
from .twolevel import pauli_dot


@dataclass(frozen=True, eq=False)
class GaugePotential:
    """The velocity-contracted gauge potential lambda_dot . A at one time."""

    operator: np.ndarray
    time: float

    def __post_init__(self):
        object.__setattr__(self, "operator", hermitian(self.operator, atol=1e-10))


def gauge_potential(path: Protocol, t: float, fd_step: float | None = None) -> GaugePotential:
    """i sum_{m != n} |e_m><e_m|d/dt e_n><e_n| from the gauge-fixed derivative table."""
    basis = eigendecompose(path.hamiltonian(t), time=t)
    table = np.array(eigenstate_derivative(path, t, fd_step, basis=basis))
    np.fill_diagonal(table, 0.0)
    op = 1j * basis.from_frame(table)
    if fault_active(Fault.GAUGE_SIGN):
        op = -op
    return GaugePotential(op, t)


def two_level_cd(path: BlochProtocol, t: float) -> np.ndarray:
    """(1/2)(n x n_dot).sigma"""
    return frozen(0.5 * pauli_dot(np.cross(path.bloch_vector(t), path.bloch_velocity(t))))


def basis_transform(rho_E: StateVec, basis_E: SpectralDecomposition,
                    basis_eps: SpectralDecomposition) -> StateVec:
    """Re-express a state given in basis_E in the eigenbasis basis_eps."""
    if not rho_E.dim == basis_E.dim == basis_eps.dim:
        raise DimensionMismatch(
            f"dimensions differ: state {rho_E.dim}, bases {basis_E.dim} and {basis_eps.dim}")
    overlap = dagger(basis_eps.eigenvectors) @ basis_E.eigenvectors
    return StateVec.from_matrix(overlap @ rho_E.matrix() @ dagger(overlap))


class CounterdiabaticDrive(Protocol):
    """H(t) + H_cd(t) for a wrapped protocol."""

    def __init__(self, base: Protocol, fd_step: float | None = None):
        self.base = base
        self.omega = base.omega
        self.fd_step = fd_step

    @property
    def dim(self) -> int:
        return self.base.dim

    def default_fd_step(self) -> float:
        return self.base.default_fd_step()

    def counterdiabatic_term(self, t: float) -> np.ndarray:
        if isinstance(self.base, BlochProtocol):
            return two_level_cd(self.base, t)
        return gauge_potential(self.base, t, self.fd_step).operator

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.base.hamiltonian(t) + self.counterdiabatic_term(t)


def with_counterdiabatic(protocol: Protocol) -> Protocol:
    if isinstance(protocol, CounterdiabaticDrive):
        return protocol
    return CounterdiabaticDrive(protocol)
