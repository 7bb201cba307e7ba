"""Closed forms for the driven two-level system.

Populations and coherences returned by `analytic_first_order` use the
(excited, ground) ordering: index 0 is the state at +h/2. Use
`to_energy_order` before comparing with the generic machinery, which sorts
eigenvalues ascending.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .core import ConfigError, OutOfRange, ZeroRate
from .dissipator import RateFunction
from .liouville import StateVec
from .specmat import SpectralDecomposition, hermitian

if TYPE_CHECKING:
    from .protocols import BlochProtocol

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

JUMPS = {"z": PAULI_Z, "x": PAULI_X}


def bloch_vector(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def pauli_dot(v) -> np.ndarray:
    return v[0] * PAULI_X + v[1] * PAULI_Y + v[2] * PAULI_Z


def bloch_hamiltonian(h: float, theta: float, phi: float) -> np.ndarray:
    """(h/2) n.sigma"""
    if h <= 0:
        raise OutOfRange(f"h must be positive, got {h}")
    return hermitian(0.5 * h * pauli_dot(bloch_vector(theta, phi)))


def bloch_eigenbasis(h: float, theta: float, phi: float, time: float = 0.0) -> SpectralDecomposition:
    """Analytic eigenbasis, ground state first."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    excited = np.array([c, np.exp(1j * phi) * s])
    ground = np.array([-np.exp(-1j * phi) * s, c])
    return SpectralDecomposition(np.array([-h / 2, h / 2]), np.column_stack([ground, excited]), time)


def bloch_connection(theta: float, phi: float, dtheta: float, dphi: float) -> complex:
    """<ground| d/dt excited> for the states of `bloch_eigenbasis`."""
    return 0.5 * np.exp(1j * phi) * (dtheta + 1j * dphi * np.sin(theta))


@dataclass(frozen=True)
class TwoLevelRates:
    Gamma: float
    Gamma2: float

    def __post_init__(self):
        if self.Gamma < 0 or self.Gamma2 < 0:
            raise ConfigError(f"rates must be nonnegative, got {self}")


def _rates(overlap: float, h: float, beta: float, gamma_table: RateFunction) -> TwoLevelRates:
    # overlap is the squared weight of the jump axis along n
    gap, zero = gamma_table(h), gamma_table(0.0)
    flip = 1.0 - overlap
    return TwoLevelRates(
        Gamma=gap * flip,
        Gamma2=0.5 * (1.0 + np.exp(-beta * h)) * gap * flip + 2.0 * zero * overlap,
    )


def rates_z(h: float, theta: float, beta: float, gamma_table: RateFunction) -> TwoLevelRates:
    return _rates(np.cos(theta) ** 2, h, beta, gamma_table)


def rates_x(h: float, theta: float, phi: float, beta: float, gamma_table: RateFunction) -> TwoLevelRates:
    return _rates((np.sin(theta) * np.cos(phi)) ** 2, h, beta, gamma_table)


def rates_for(jump: str, h: float, theta: float, phi: float, beta: float,
              gamma_table: RateFunction) -> TwoLevelRates:
    if jump == "z":
        return rates_z(h, theta, beta, gamma_table)
    if jump == "x":
        return rates_x(h, theta, phi, beta, gamma_table)
    raise ConfigError(f"unknown jump kind {jump!r} (expected 'z' or 'x')")


def analytic_first_order(path: BlochProtocol, t: float, beta: float, rates: TwoLevelRates,
                         with_cd: bool = False) -> StateVec:
    """Gibbs populations plus the first-order slow-driving correction.

    The coherences are (rho_eg, rho_ge) in the basis of `bloch_eigenbasis`.
    """
    h, theta, phi = path.parameters(t)
    dh, dtheta, dphi = path.velocities(t)
    if h <= 0:
        raise OutOfRange(f"h must be positive, got {h} at t={t}")

    x = np.exp(-beta * h)
    gibbs = np.array([x, 1.0]) / (1.0 + x)
    if dh == 0.0:
        pop = gibbs
    elif rates.Gamma == 0.0:
        raise ZeroRate(f"Gamma vanishes at t={t} while h is changing")
    else:
        dx = -beta * dh * x
        pop = gibbs + dx / (rates.Gamma * (1.0 + x) ** 3) * np.array([-1.0, 1.0])

    up = 1.0 / (rates.Gamma2 + 1j * h)
    down = 1.0 / (rates.Gamma2 - 1j * h)
    if with_cd:
        up -= 1.0 / (1j * h)
        down -= 1.0 / (-1j * h)
    conn = bloch_connection(theta, phi, dtheta, dphi)
    polar = np.tanh(0.5 * beta * h)
    return StateVec(pop, np.array([polar * np.conj(conn) * up, polar * conn * down]))


def to_energy_order(state: StateVec) -> StateVec:
    """(excited, ground) to ascending-energy ordering."""
    if state.dim != 2:
        raise ConfigError("to_energy_order only applies to two-level states")
    return StateVec(state.pop[::-1], state.coh[::-1])
