"""Core types, errors and small operator utilities."""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np


class GKLSError(Exception):
    """Base class for every error raised by the simulator."""


class DegenerateSpectrum(GKLSError):
    pass


class PathDiscontinuity(GKLSError):
    pass


class DimensionMismatch(GKLSError, ValueError):
    pass


class NotHermitian(GKLSError, ValueError):
    pass


class InvalidDensityMatrix(GKLSError, ValueError):
    pass


class OutOfRange(GKLSError, ValueError):
    pass


class NonSimpleKernel(GKLSError):
    pass


class SingularCoherenceBlock(GKLSError):
    pass


class ZeroRate(GKLSError):
    pass


class StepsizeUnderflow(GKLSError):
    pass


class PositivityViolation(GKLSError):
    pass


class ConfigError(GKLSError, ValueError):
    pass


class Status(Enum):
    PASS = "PASS"
    FAIL = "FAIL"


@dataclass
class CheckResult:
    name: str
    category: str
    status: Status
    residual: float
    threshold: float
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == Status.PASS


class Fault(Enum):
    """Deliberate sign errors used to prove that the validation suite bites."""

    KMS_SIGN = "kms-sign"
    GAUGE_SIGN = "gauge-sign"
    DELTA_SIGN = "delta-sign"


_active_faults: contextvars.ContextVar[frozenset[Fault]] = contextvars.ContextVar(
    "periodic_gkls_faults", default=frozenset()
)


@contextlib.contextmanager
def inject(*faults: Fault) -> Iterator[None]:
    """Activate faults for the duration of the block (current context only)."""
    token = _active_faults.set(_active_faults.get() | frozenset(faults))
    try:
        yield
    finally:
        _active_faults.reset(token)


def fault_active(fault: Fault) -> bool:
    return fault in _active_faults.get()


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def max_abs(a: np.ndarray) -> float:
    """Max-norm of an array (0 for empty arrays)."""
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def frozen(a: np.ndarray) -> np.ndarray:
    """Return a read-only copy so value types stay immutable."""
    out = np.array(a, copy=True)
    out.setflags(write=False)
    return out


def as_square(matrix, name: str = "matrix") -> np.ndarray:
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
