"""Periodic driving protocols.

A protocol is a smooth periodic path t -> H(t). Bloch protocols are the
two-level family H = (h/2) n(theta, phi).sigma and expose their parameters
and analytic velocities; `HarmonicProtocol` covers any dimension.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
from scipy.interpolate import CubicSpline

from .core import ConfigError, check_same_dim
from .specmat import hermitian
from .twolevel import bloch_hamiltonian, bloch_vector, pauli_dot


class Protocol(ABC):
    omega: float

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def hamiltonian(self, t: float) -> np.ndarray: ...

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def hamiltonian_rate(self, t: float) -> np.ndarray:
        step = self.default_fd_step()
        return (self.hamiltonian(t + step) - self.hamiltonian(t - step)) / (2.0 * step)

    def default_fd_step(self) -> float:
        return 1e-4 * self.period


def _positive_omega(omega: float) -> float:
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    return float(omega)


class BlochProtocol(Protocol):
    """Two-level path parametrised by (h, theta, phi)."""

    @property
    def dim(self) -> int:
        return 2

    @abstractmethod
    def parameters(self, t: float) -> tuple[float, float, float]: ...

    @abstractmethod
    def velocities(self, t: float) -> tuple[float, float, float]: ...

    def bloch_vector(self, t: float) -> np.ndarray:
        _, theta, phi = self.parameters(t)
        return bloch_vector(theta, phi)

    def bloch_velocity(self, t: float) -> np.ndarray:
        _, theta, phi = self.parameters(t)
        _, dtheta, dphi = self.velocities(t)
        d_theta = np.array([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)])
        d_phi = np.array([-np.sin(theta) * np.sin(phi), np.sin(theta) * np.cos(phi), 0.0])
        return dtheta * d_theta + dphi * d_phi

    def hamiltonian(self, t: float) -> np.ndarray:
        return bloch_hamiltonian(*self.parameters(t))

    def hamiltonian_rate(self, t: float) -> np.ndarray:
        h = self.parameters(t)[0]
        dh = self.velocities(t)[0]
        return 0.5 * pauli_dot(dh * self.bloch_vector(t) + h * self.bloch_velocity(t))


class ConstantProtocol(BlochProtocol):
    """Static Bloch Hamiltonian; the reference period is 2 pi / h."""

    def __init__(self, h: float, theta: float = np.pi / 4, phi: float = 0.0):
        self.h, self.theta, self.phi = float(h), float(theta), float(phi)
        self.omega = _positive_omega(self.h)

    def parameters(self, t: float) -> tuple[float, float, float]:
        return self.h, self.theta, self.phi

    def velocities(self, t: float) -> tuple[float, float, float]:
        return 0.0, 0.0, 0.0


class RotatingProtocol(BlochProtocol):
    """theta fixed, phi = omega t."""

    def __init__(self, h: float, omega: float, theta: float = np.pi / 4, phi0: float = 0.0):
        self.h, self.theta, self.phi0 = float(h), float(theta), float(phi0)
        self.omega = _positive_omega(omega)

    def parameters(self, t: float) -> tuple[float, float, float]:
        return self.h, self.theta, self.omega * t + self.phi0

    def velocities(self, t: float) -> tuple[float, float, float]:
        return 0.0, 0.0, self.omega


class NutatingProtocol(BlochProtocol):
    """theta = (pi/2)(1 - cos(omega t)/5), phi = omega t."""

    def __init__(self, h: float, omega: float):
        self.h = float(h)
        self.omega = _positive_omega(omega)

    def parameters(self, t: float) -> tuple[float, float, float]:
        wt = self.omega * t
        return self.h, 0.5 * np.pi * (1.0 - np.cos(wt) / 5.0), wt

    def velocities(self, t: float) -> tuple[float, float, float]:
        return 0.0, 0.1 * np.pi * self.omega * np.sin(self.omega * t), self.omega


class SplineProtocol(BlochProtocol):
    """Periodic cubic splines through evenly spaced knots over one period.

    `winding` adds winding * omega * t to phi so the azimuth may circle the
    z axis.
    """

    def __init__(self, omega: float, h: list[float], theta: list[float], phi: list[float],
                 winding: int = 0):
        self.omega = _positive_omega(omega)
        if min(h) <= 0:
            raise ConfigError("spline knots for h must be positive")
        self.winding = int(winding)
        self._h = self._periodic(h, "h")
        self._theta = self._periodic(theta, "theta")
        self._phi = self._periodic(phi, "phi")

    def _periodic(self, knots: list[float], name: str) -> CubicSpline:
        if len(knots) < 2:
            raise ConfigError(f"spline {name!r} needs at least 2 knots")
        values = np.append(np.asarray(knots, dtype=float), knots[0])
        grid = np.linspace(0.0, self.period, len(values))
        return CubicSpline(grid, values, bc_type="periodic")

    def _wrap(self, t: float) -> float:
        return float(np.mod(t, self.period))

    def parameters(self, t: float) -> tuple[float, float, float]:
        s = self._wrap(t)
        return (float(self._h(s)), float(self._theta(s)),
                float(self._phi(s)) + self.winding * self.omega * t)

    def velocities(self, t: float) -> tuple[float, float, float]:
        s = self._wrap(t)
        return (float(self._h(s, 1)), float(self._theta(s, 1)),
                float(self._phi(s, 1)) + self.winding * self.omega)

    @classmethod
    def random(cls, rng: np.random.Generator, omega: float, knots: int = 6,
               h: float = 1.0) -> "SplineProtocol":
        """Random smooth path with constant h, used by the validation suite."""
        return cls(
            omega=omega,
            h=[h] * knots,
            theta=list(rng.uniform(0.3, np.pi - 0.3, knots)),
            phi=list(rng.uniform(-np.pi, np.pi, knots)),
            winding=int(rng.integers(-1, 2)),
        )


class HarmonicProtocol(Protocol):
    """H(t) = A + cos(omega t) B + sin(omega t) C."""

    def __init__(self, a, b, c, omega: float):
        self.a, self.b, self.c = hermitian(a), hermitian(b), hermitian(c)
        check_same_dim(self.a, self.b)
        check_same_dim(self.a, self.c)
        self.omega = _positive_omega(omega)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def hamiltonian(self, t: float) -> np.ndarray:
        wt = self.omega * t
        return self.a + np.cos(wt) * self.b + np.sin(wt) * self.c

    def hamiltonian_rate(self, t: float) -> np.ndarray:
        wt = self.omega * t
        return self.omega * (np.cos(wt) * self.c - np.sin(wt) * self.b)
