"""Thermodynamically consistent dissipator.

Jump operators are projected onto energy gaps of the instantaneous
Hamiltonian; rates obey the KMS condition so that the instantaneous Gibbs
state is stationary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping

import numpy as np

from .core import (
    ConfigError, DimensionMismatch, Fault, OutOfRange, as_square, dagger,
    fault_active, frozen,
)
from .specmat import SpectralDecomposition, hermitian

GAP_TOL = 1e-8


class Extrapolation(Enum):
    NONE = "none"
    CONSTANT = "constant"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class RateFunction:
    """Tabulated positive branch of gamma(eps); the negative branch follows from KMS."""

    beta: float
    gaps: tuple[float, ...]
    values: tuple[float, ...]
    extrapolation: Extrapolation = Extrapolation.NONE

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if len(self.gaps) != len(self.values) or not self.gaps:
            raise ConfigError("rate table needs matching, nonempty gap and value lists")
        if self.gaps[0] != 0.0:
            raise ConfigError("rate table must start at gap 0")
        if any(b <= a for a, b in zip(self.gaps, self.gaps[1:])):
            raise ConfigError("rate table gaps must be strictly increasing")
        if any(v < 0 for v in self.values):
            raise ConfigError("rates must be nonnegative")

    @classmethod
    def from_table(cls, beta: float, table: Mapping[float, float], zero: float,
                   extrapolation: Extrapolation | str = Extrapolation.NONE) -> "RateFunction":
        """Build from {gap: rate} pairs (gap > 0) plus the value at eps = 0."""
        pairs = sorted((float(g), float(r)) for g, r in table.items() if g > 0)
        return cls(
            beta=float(beta),
            gaps=(0.0,) + tuple(g for g, _ in pairs),
            values=(float(zero),) + tuple(r for _, r in pairs),
            extrapolation=Extrapolation(extrapolation),
        )

    def __call__(self, eps: float) -> float:
        return rate(self, eps)


def _positive_branch(rf: RateFunction, eps: float) -> float:
    top = rf.gaps[-1]
    if eps <= top * (1.0 + 1e-12) or eps == 0.0:
        return float(np.interp(eps, rf.gaps, rf.values))
    if rf.extrapolation == Extrapolation.CONSTANT:
        return rf.values[-1]
    if rf.extrapolation == Extrapolation.LINEAR and len(rf.gaps) > 1:
        slope = (rf.values[-1] - rf.values[-2]) / (rf.gaps[-1] - rf.gaps[-2])
        return max(0.0, rf.values[-1] + slope * (eps - top))
    raise OutOfRange(f"gap {eps:.6g} outside the rate table (max {top:.6g})")


def rate(rf: RateFunction, eps: float) -> float:
    """gamma(eps); for eps < 0 the KMS closure e^{beta eps} gamma(-eps)."""
    if eps >= 0:
        return _positive_branch(rf, eps)
    sign = -1.0 if fault_active(Fault.KMS_SIGN) else 1.0
    return float(np.exp(sign * rf.beta * eps)) * _positive_branch(rf, -eps)


@dataclass(frozen=True, eq=False)
class ProjectedJumpSet:
    """Energy-projected pieces L^eps of each source jump, stored for eps >= 0."""

    sources: Mapping[str, np.ndarray]
    buckets: Mapping[str, tuple[tuple[float, np.ndarray], ...]]

    def labels(self) -> list[str]:
        return list(self.buckets)

    def signed(self, label: str) -> Iterator[tuple[float, np.ndarray]]:
        """Yield (eps, L^eps) over both signs; L^{-eps} is the adjoint of L^eps."""
        for gap, op in self.buckets[label]:
            yield gap, op
            if gap > 0:
                yield -gap, dagger(op)


def _cluster(gaps: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(gaps, kind="stable")
    groups: list[list[int]] = []
    for i in order:
        if groups and gaps[i] - gaps[groups[-1][0]] < tol:
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    return groups


def project_jump(jump, basis: SpectralDecomposition, gap_tol: float | None = None,
                 label: str = "L") -> ProjectedJumpSet:
    """Split a Hermitian jump operator into gap buckets of `basis`."""
    op = hermitian(jump)
    n = basis.dim
    if op.shape[0] != n:
        raise DimensionMismatch(f"jump operator is {op.shape[0]}-dimensional, basis is {n}")
    energies = basis.eigenvalues
    span = energies[-1] - energies[0] if n > 1 else 0.0
    tol = GAP_TOL * span if gap_tol is None else gap_tol

    frame = basis.to_frame(op)
    # entry (row k, column m) lowers |m> to |k> across the gap e_m - e_k
    rows, cols = np.nonzero(energies[None, :] - energies[:, None] >= -tol)
    gaps = energies[cols] - energies[rows]
    keep = gaps > -tol
    rows, cols, gaps = rows[keep], cols[keep], np.maximum(gaps[keep], 0.0)

    buckets = []
    for group in _cluster(gaps, tol):
        piece = np.zeros((n, n), dtype=complex)
        piece[rows[group], cols[group]] = frame[rows[group], cols[group]]
        if not np.any(piece):
            continue
        key = float(np.mean(gaps[group]))
        if key < tol:
            key = 0.0
        buckets.append((key, frozen(basis.from_frame(piece))))
    return ProjectedJumpSet(sources={label: op}, buckets={label: tuple(buckets)})


@dataclass(frozen=True, eq=False)
class Channel:
    label: str
    operator: np.ndarray
    rates: RateFunction


@dataclass(frozen=True, eq=False)
class ThermalDissipator:
    jumps: ProjectedJumpSet
    rates: Mapping[str, RateFunction]
    basis: SpectralDecomposition
    beta: float

    @property
    def dim(self) -> int:
        return self.basis.dim

    def terms(self) -> Iterator[tuple[float, np.ndarray]]:
        """Yield (gamma(eps), L^eps) for every label and signed gap."""
        for label in self.jumps.labels():
            rf = self.rates[label]
            for eps, op in self.jumps.signed(label):
                yield rf(eps), op


@dataclass(frozen=True, eq=False)
class DissipatorSpec:
    """Time-independent description of the reservoir coupling.

    `at(basis)` rebuilds the projected dissipator for an instantaneous
    eigenbasis.
    """

    channels: tuple[Channel, ...]
    beta: float
    gap_tol: float | None = field(default=None)

    def __post_init__(self):
        if not self.channels:
            raise ConfigError("at least one jump channel is required")
        for ch in self.channels:
            if abs(ch.rates.beta - self.beta) > 1e-15 * max(1.0, self.beta):
                raise ConfigError(f"channel {ch.label!r} has beta {ch.rates.beta}, expected {self.beta}")

    @classmethod
    def single(cls, jump, rates: RateFunction, label: str = "L") -> "DissipatorSpec":
        return cls(channels=(Channel(label, hermitian(jump), rates),), beta=rates.beta)

    def at(self, basis: SpectralDecomposition) -> ThermalDissipator:
        sources: dict[str, np.ndarray] = {}
        buckets: dict[str, tuple] = {}
        for ch in self.channels:
            projected = project_jump(ch.operator, basis, self.gap_tol, ch.label)
            sources.update(projected.sources)
            buckets.update(projected.buckets)
        return ThermalDissipator(
            jumps=ProjectedJumpSet(sources, buckets),
            rates={ch.label: ch.rates for ch in self.channels},
            basis=basis,
            beta=self.beta,
        )


def apply_dissipator(d: ThermalDissipator, rho) -> np.ndarray:
    """D_beta[rho] summed over all labels and gaps of both signs."""
    rho = as_square(rho, "rho")
    if rho.shape[0] != d.dim:
        raise DimensionMismatch(f"rho is {rho.shape[0]}-dimensional, dissipator is {d.dim}")
    out = np.zeros_like(rho)
    for gamma, op in d.terms():
        if gamma == 0.0:
            continue
        op_dag = dagger(op)
        number = op_dag @ op
        out += gamma * (op @ rho @ op_dag - 0.5 * (number @ rho + rho @ number))
    return out


def dissipator_superoperator(d: ThermalDissipator, frame: np.ndarray | None = None) -> np.ndarray:
    """Row-major superoperator of D_beta, optionally expressed in `frame`.

    Uses vec(A X B) = (A kron B^T) vec(X).
    """
    n = d.dim
    eye = np.eye(n)
    out = np.zeros((n * n, n * n), dtype=complex)
    for gamma, op in d.terms():
        if gamma == 0.0:
            continue
        if frame is not None:
            op = dagger(frame) @ op @ frame
        number = dagger(op) @ op
        out += gamma * (np.kron(op, op.conj()) - 0.5 * np.kron(number, eye)
                        - 0.5 * np.kron(eye, number.T))
    return out


def gibbs_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    w = np.exp(-beta * (np.asarray(energies) - np.min(energies)))
    return w / w.sum()


def gibbs_state(basis: SpectralDecomposition, beta: float) -> np.ndarray:
    """e^{-beta H}/Z built in the eigenbasis of H."""
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    rho = basis.from_frame(np.diag(gibbs_weights(basis.eigenvalues, beta)).astype(complex))
    return frozen(rho / np.trace(rho).real)
