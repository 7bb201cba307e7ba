"""Invariant checks behind `periodic-gkls validate`.

Every check draws seeded random instances, measures a residual and compares
it with a threshold. Failures are reported as data, never raised.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Callable, Iterable

import numpy as np

from .config import CHECKS_META, SimConfig
from .core import CheckResult, ConfigError, Fault, GKLSError, Status, commutator, dagger, inject, max_abs
from .counterdiabatic import gauge_potential, two_level_cd
from .dissipator import (
    DissipatorSpec, Extrapolation, RateFunction, apply_dissipator, gibbs_state, gibbs_weights,
    project_jump,
)
from .engine import expand
from .expansion import first_order
from .liouville import (
    assemble_generator, build_K, dense_oracle, devectorize, rotation_superoperator,
    to_block_order, unitary_superoperator,
)
from .protocols import ConstantProtocol, HarmonicProtocol, NutatingProtocol, RotatingProtocol, SplineProtocol
from .specmat import eigendecompose, eigenstate_derivative, trace_distance
from .twolevel import JUMPS, analytic_first_order, bloch_eigenbasis, rates_for, to_energy_order

logger = logging.getLogger(__name__)

BETAS = (0.5, 1.0, 2.0)


# -- random instances --------------------------------------------------------

def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * scale * (a + dagger(a))


def random_density(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ dagger(a)
    return rho / np.trace(rho).real


def random_rates(rng: np.random.Generator, beta: float) -> RateFunction:
    gaps = np.sort(rng.uniform(0.2, 4.0, 3))
    return RateFunction.from_table(beta, {float(g): float(rng.uniform(0.1, 1.0)) for g in gaps},
                                   zero=float(rng.uniform(0.0, 0.5)),
                                   extrapolation=Extrapolation.CONSTANT)


def random_harmonic(rng: np.random.Generator, n: int) -> HarmonicProtocol:
    """Well-separated levels with a weak periodic modulation."""
    a = np.diag(2.0 * np.arange(n)).astype(complex) + random_hermitian(rng, n, 0.3)
    return HarmonicProtocol(a, random_hermitian(rng, n, 0.3), random_hermitian(rng, n, 0.3),
                            omega=float(rng.uniform(0.05, 0.5)))


def _sizes(trials: int, dims: tuple[int, ...]) -> Iterable[tuple[int, int]]:
    for i in range(trials):
        yield i, dims[i % len(dims)]


# -- spectral ----------------------------------------------------------------

def check_eigen_reconstruct(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for _, n in _sizes(cfg.trials, (2, 3, 4, 6, 8)):
        h = random_hermitian(rng, n)
        basis = eigendecompose(h)
        v = basis.eigenvectors
        worst = max(worst, max_abs(basis.reconstruct() - h), max_abs(dagger(v) @ v - np.eye(n)))
    return worst, 1e-10


def check_eigen_derivative(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for _, n in _sizes(cfg.trials, (2, 3, 4)):
        path = SplineProtocol.random(rng, omega=0.1) if n == 2 else random_harmonic(rng, n)
        t = float(rng.uniform(0.0, path.period))
        basis = eigendecompose(path.hamiltonian(t), time=t)
        table = eigenstate_derivative(path, t, fd_step=1e-5 * path.period, basis=basis)
        # <e_m|d/dt e_n> = <e_m|dH/dt|e_n> / (E_n - E_m) off the diagonal, zero on it
        gaps = basis.eigenvalues[None, :] - basis.eigenvalues[:, None]
        np.fill_diagonal(gaps, np.inf)
        worst = max(worst, max_abs(table - basis.to_frame(path.hamiltonian_rate(t)) / gaps))
    return worst, 1e-6


def check_metric_triangle(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for _, n in _sizes(cfg.trials, (2, 3, 4)):
        a, b, c = (random_density(rng, n) for _ in range(3))
        worst = max(worst, trace_distance(a, c) - trace_distance(a, b) - trace_distance(b, c))
    return max(worst, 0.0), 1e-12


# -- dissipator --------------------------------------------------------------

def _random_dissipator(rng: np.random.Generator, n: int, i: int):
    beta = BETAS[i % len(BETAS)]
    basis = eigendecompose(random_hermitian(rng, n))
    spec = DissipatorSpec.single(random_hermitian(rng, n), random_rates(rng, beta))
    return basis, spec.at(basis), beta


def check_diss_stationary(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for i, n in _sizes(cfg.trials, (2, 3, 4)):
        basis, d, beta = _random_dissipator(rng, n, i)
        worst = max(worst, max_abs(apply_dissipator(d, gibbs_state(basis, beta))))
    return worst, 1e-10


def check_diss_trace(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for i, n in _sizes(cfg.trials, (2, 3, 4)):
        _, d, _ = _random_dissipator(rng, n, i)
        out = apply_dissipator(d, random_density(rng, n))
        worst = max(worst, abs(np.trace(out)), max_abs(out - dagger(out)))
    return worst, 1e-10


def check_diss_ladder(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for _, n in _sizes(cfg.trials, (2, 3, 4)):
        h = random_hermitian(rng, n)
        jump = random_hermitian(rng, n)
        projected = project_jump(jump, eigendecompose(h))
        total = np.zeros((n, n), dtype=complex)
        for eps, op in projected.signed("L"):
            worst = max(worst, max_abs(commutator(h, op) + eps * op))
            total += op
        worst = max(worst, max_abs(total - jump))
    return worst, 1e-10


def check_diss_kms(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for i, n in _sizes(cfg.trials, (2, 3, 4)):
        basis, d, beta = _random_dissipator(rng, n, i)
        k = build_K(d)
        flux = k * gibbs_weights(basis.eigenvalues, beta)[None, :]
        worst = max(worst, max_abs(flux - flux.T))
    return worst, 1e-10


# -- generator ---------------------------------------------------------------

def check_blocks_colsum(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for i, n in _sizes(cfg.trials, (2, 3, 4)):
        _, d, _ = _random_dissipator(rng, n, i)
        k = build_K(d)
        off = k - np.diag(np.diag(k))
        worst = max(worst, max_abs(k.sum(axis=0)), max(0.0, -float(off.min())))
    return worst, 1e-10


def check_blocks_oracle(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for i, n in _sizes(cfg.trials, (2, 3)):
        path = random_harmonic(rng, n)
        spec = DissipatorSpec.single(random_hermitian(rng, n), random_rates(rng, BETAS[i % 3]))
        t = float(rng.uniform(0.0, path.period))
        for with_cd in (False, True):
            blocks = assemble_generator(path, t, spec, with_cd)
            oracle = dense_oracle(path, t, spec, with_cd)
            worst = max(worst, max_abs(blocks.dense() - oracle))
    return worst, 1e-10


def check_blocks_cancel(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for _, n in _sizes(cfg.trials, (2, 3)):
        path = random_harmonic(rng, n)
        t = float(rng.uniform(0.0, path.period))
        basis = eigendecompose(path.hamiltonian(t), time=t)
        table = eigenstate_derivative(path, t, basis=basis)
        h_cd = gauge_potential(path, t).operator
        drive = to_block_order(unitary_superoperator(h_cd, basis.eigenvectors)
                               + rotation_superoperator(table), n)
        worst = max(worst, max_abs(drive))
    return worst, 1e-10


# -- counterdiabatic ---------------------------------------------------------

def check_cd_closed_form(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for _ in range(cfg.trials):
        path = SplineProtocol.random(rng, omega=0.1)
        t = float(rng.uniform(0.0, path.period))
        generic = gauge_potential(path, t, fd_step=1e-5 * path.period).operator
        worst = max(worst, max_abs(generic - two_level_cd(path, t)))
    return worst, 1e-7


# -- two-level oracles -------------------------------------------------------

def check_twolevel_rates(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    beta, h = 1.0, 1.0
    rf = RateFunction.from_table(beta, {h: 0.5}, zero=0.1)
    worst = 0.0
    for jump in ("z", "x"):
        spec = DissipatorSpec.single(JUMPS[jump], rf, label=jump)
        for theta in np.linspace(0.0, np.pi, 20):
            for phi in np.linspace(0.0, 2.0 * np.pi, 20, endpoint=False):
                blocks = assemble_generator(ConstantProtocol(h, theta, phi), 0.0, spec)
                expected = rates_for(jump, h, theta, phi, beta, rf)
                kcoh = blocks.kcoh
                worst = max(worst,
                            abs(blocks.K[0, 1] - expected.Gamma),
                            abs(-kcoh[0, 0].real - expected.Gamma2),
                            abs(-kcoh[1, 1].real - expected.Gamma2),
                            abs(kcoh[0, 1]), abs(kcoh[1, 0]))
    return worst, 1e-10


def _twolevel_paths(rng: np.random.Generator, omega: float):
    yield RotatingProtocol(1.0, omega, theta=float(rng.uniform(0.3, 1.3)))
    yield NutatingProtocol(1.0, omega)
    yield SplineProtocol(omega, h=list(rng.uniform(0.8, 1.2, 5)),
                         theta=list(rng.uniform(0.4, 1.2, 5)), phi=list(rng.uniform(-1, 1, 5)),
                         winding=1)


def check_twolevel_first_order(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    worst = 0.0
    for beta in (0.5, 1.0, 2.0):
        rf = RateFunction.from_table(beta, {1.0: 0.5}, zero=0.05, extrapolation=Extrapolation.LINEAR)
        for omega in (0.02, 0.1):
            for path in _twolevel_paths(rng, omega):
                t = float(rng.uniform(0.0, path.period))
                h, theta, phi = path.parameters(t)
                for jump in ("z", "x"):
                    spec = DissipatorSpec.single(JUMPS[jump], rf, label=jump)
                    rates = rates_for(jump, h, theta, phi, beta, rf)
                    for with_cd in (False, True):
                        generic = first_order(path, t, spec, with_cd, fd_step=1e-5 * path.period)
                        closed = to_energy_order(analytic_first_order(path, t, beta, rates, with_cd))
                        diff = (devectorize(generic.state(), generic.basis)
                                - devectorize(closed, bloch_eigenbasis(h, theta, phi)))
                        worst = max(worst, max_abs(diff))
    return worst, 1e-8


# -- expansion ---------------------------------------------------------------

def expansion_deviation(cfg: SimConfig, omega: float) -> float:
    """Largest lab-frame distance between the integrated state and orders 0+1 over the last period."""
    run = dataclasses.replace(cfg, protocol="p1", omega=omega, with_cd=False,
                              periods=2, transient_periods=1, tolerance=1e-8)
    return max(row.difference for row in expand(run, order=1))


def check_expansion_order(cfg: SimConfig, rng: np.random.Generator) -> tuple[float, float]:
    ratio = expansion_deviation(cfg, 0.02) / expansion_deviation(cfg, 0.01)
    # scored as distance from the interval [3, 5]
    return max(3.0 - ratio, ratio - 5.0, 0.0), 0.0


CHECKS: dict[str, Callable[[SimConfig, np.random.Generator], tuple[float, float]]] = {
    "eigen.reconstruct": check_eigen_reconstruct,
    "eigen.derivative": check_eigen_derivative,
    "metric.triangle": check_metric_triangle,
    "diss.stationary": check_diss_stationary,
    "diss.trace": check_diss_trace,
    "diss.ladder": check_diss_ladder,
    "diss.kms": check_diss_kms,
    "blocks.colsum": check_blocks_colsum,
    "blocks.oracle": check_blocks_oracle,
    "blocks.cancel": check_blocks_cancel,
    "cd.closed_form": check_cd_closed_form,
    "twolevel.rates": check_twolevel_rates,
    "twolevel.first_order": check_twolevel_first_order,
    "expansion.order": check_expansion_order,
}


def run_check(name: str, cfg: SimConfig) -> CheckResult:
    _, category = CHECKS_META[name]
    rng = np.random.default_rng(cfg.seed)
    try:
        residual, threshold = CHECKS[name](cfg, rng)
    except GKLSError as e:
        return CheckResult(name, category, Status.FAIL, float("nan"), float("nan"),
                           f"{type(e).__name__}: {e}")
    status = Status.PASS if residual <= threshold else Status.FAIL
    logger.debug("%s: residual %.3e (threshold %.1e)", name, residual, threshold)
    return CheckResult(name, category, status, float(residual), threshold)


def validate(cfg: SimConfig, only: Iterable[str] | None = None,
             faults: Iterable[Fault] = ()) -> list[CheckResult]:
    """Run the enabled checks, optionally restricted to `only`, under `faults`."""
    selected = list(only) if only else [name for name in CHECKS if cfg.is_enabled(name)]
    unknown = [name for name in selected if name not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(unknown)}")
    with inject(*faults):
        return [run_check(name, cfg) for name in selected]
