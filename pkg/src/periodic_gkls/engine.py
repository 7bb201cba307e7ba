"""Time-domain integration, scans and expansion comparisons."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import trapezoid

from .config import SimConfig
from .core import ConfigError, GKLSError, PositivityViolation, StepsizeUnderflow, dagger, max_abs
from .counterdiabatic import basis_transform, with_counterdiabatic
from .dissipator import DissipatorSpec, RateFunction, gibbs_state
from .expansion import ExpansionResult, first_order, second_order, zeroth_order
from .liouville import StateVec, devectorize, lab_generator, vectorize
from .protocols import (
    BlochProtocol, ConstantProtocol, NutatingProtocol, Protocol, RotatingProtocol, SplineProtocol,
)
from .specmat import SpectralDecomposition, density_matrix, eigendecompose, gauge_align, trace_distance
from .twolevel import JUMPS

logger = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-6


def build_protocol(cfg: SimConfig) -> BlochProtocol:
    if cfg.protocol == "p1":
        return RotatingProtocol(cfg.h0, cfg.omega, theta=cfg.theta, phi0=cfg.phi)
    if cfg.protocol == "p2":
        return NutatingProtocol(cfg.h0, cfg.omega)
    if cfg.protocol == "static":
        return ConstantProtocol(cfg.h0, cfg.theta, cfg.phi)
    if cfg.protocol == "spline":
        s = cfg.spline
        return SplineProtocol(cfg.omega, s["h"], s["theta"], s["phi"], s.get("winding", 0))
    raise ConfigError(f"unknown protocol {cfg.protocol!r}")


def build_rates(cfg: SimConfig) -> RateFunction:
    return RateFunction.from_table(cfg.beta, {cfg.h0: cfg.gamma_gap}, cfg.gamma_zero,
                                   cfg.rate_extrapolation)


def build_dissipator(cfg: SimConfig) -> DissipatorSpec:
    return DissipatorSpec.single(JUMPS[cfg.jump], build_rates(cfg), label=cfg.jump)


def initial_state(cfg: SimConfig, protocol: Protocol) -> np.ndarray:
    """Initial density matrix from populations/coherences in the eigenbasis of H(0)."""
    basis = eigendecompose(protocol.hamiltonian(0.0))
    coh = [complex(re, im) for re, im in cfg.initial_coh] or [0.0, 0.0]
    state = StateVec(np.asarray(cfg.initial_pop, dtype=float), np.asarray(coh))
    try:
        return density_matrix(devectorize(state, basis))
    except GKLSError as e:
        raise ConfigError(f"initial state is not a density matrix: {e}") from e


class GeneratorCache:
    """Lab-frame generators keyed by phase within the period.

    Half-step index j on a grid of n steps per period sits at phase
    j / (2n); grids that refine by halving share entries.
    """

    def __init__(self, drive: Protocol, d_config: DissipatorSpec):
        self.drive = drive
        self.d_config = d_config
        self._store: dict[Fraction, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._store)

    def get(self, j: int, n: int) -> np.ndarray:
        phase = Fraction(j % (2 * n), 2 * n)
        gen = self._store.get(phase)
        if gen is None:
            gen = lab_generator(self.drive, float(phase) * self.drive.period, self.d_config)
            self._store[phase] = gen
        return gen


@dataclass
class _Run:
    """Every stride-th state plus the extremes over all steps up to it.

    Entry i of `min_eigenvalues` and `trace_errors` covers the steps after
    sample i-1 up to and including sample i; entry 0 is the initial state.
    """

    samples: np.ndarray
    min_eigenvalues: np.ndarray
    trace_errors: np.ndarray


def _step_extremes(block: np.ndarray, dim: int) -> tuple[float, float]:
    mats = block.reshape(-1, dim, dim)
    herm = 0.5 * (mats + np.conj(np.swapaxes(mats, 1, 2)))
    lowest = float(np.linalg.eigvalsh(herm).min())
    trace = float(np.abs(np.trace(mats, axis1=1, axis2=2) - 1.0).max())
    return lowest, trace


def _rk4_run(cache: GeneratorCache, y0: np.ndarray, n: int, periods: int, stride: int) -> _Run:
    """Classical RK4 with n steps per period, monitoring every step."""
    dt = cache.drive.period / n
    dim = cache.drive.dim
    gens = [cache.get(j, n) for j in range(2 * n + 1)]
    y = y0.astype(complex)
    block = np.empty((stride, y.size), dtype=complex)
    samples = [y.copy()]
    lowest, trace = _step_extremes(y[None, :], dim)
    min_eig, trace_err = [lowest], [trace]
    for k in range(n * periods):
        j = 2 * (k % n)
        g0, g1, g2 = gens[j], gens[j + 1], gens[j + 2]
        k1 = g0 @ y
        k2 = g1 @ (y + 0.5 * dt * k1)
        k3 = g1 @ (y + 0.5 * dt * k2)
        k4 = g2 @ (y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        block[k % stride] = y
        if (k + 1) % stride == 0:
            samples.append(y.copy())
            lowest, trace = _step_extremes(block, dim)
            min_eig.append(lowest)
            trace_err.append(trace)
    return _Run(np.array(samples), np.array(min_eig), np.array(trace_err))


@dataclass
class Trajectory:
    """Sampled run. `trace_errors` and `min_eigenvalues` hold the extremes
    over every RK4 step since the previous sample, not just the sample."""

    times: np.ndarray
    states: list[StateVec]
    distances: np.ndarray
    trace_errors: np.ndarray
    hermiticity_errors: np.ndarray
    min_eigenvalues: np.ndarray
    rhos: list[np.ndarray]
    bases: list[SpectralDecomposition]
    period: float
    steps_per_period: int
    refinements: int
    with_cd: bool = False
    metadata: dict = field(default_factory=dict)

    def window(self, first_period: float, last_period: float) -> np.ndarray:
        """Sample indices with first_period*T <= t <= last_period*T."""
        lo, hi = first_period * self.period, last_period * self.period
        eps = 1e-9 * self.period
        return np.nonzero((self.times >= lo - eps) & (self.times <= hi + eps))[0]

    def window_average(self, first_period: float, last_period: float) -> float:
        idx = self.window(first_period, last_period)
        t = self.times[idx]
        return float(trapezoid(self.distances[idx], t) / (t[-1] - t[0]))

    def period_average(self, k: int) -> float:
        return self.window_average(k, k + 1)

    def period_max(self, k: int) -> float:
        return float(self.distances[self.window(k, k + 1)].max())

    @property
    def periods(self) -> int:
        return int(round(self.times[-1] / self.period))


def _steps(cfg: SimConfig, period: float) -> int:
    n = max(cfg.steps_per_period, math.ceil(period / cfg.max_step))
    return cfg.stride * math.ceil(n / cfg.stride)


def integrate(cfg: SimConfig) -> Trajectory:
    """Propagate the configured initial state and report d(t) at every sample.

    The state is integrated in the fixed computational basis, which keeps the
    generator periodic. The step is halved until two successive grids agree
    to `tolerance` per simulated period.
    """
    cfg.validate()
    protocol = build_protocol(cfg)
    drive = with_counterdiabatic(protocol) if cfg.with_cd else protocol
    d_config = build_dissipator(cfg)
    y0 = initial_state(cfg, protocol).reshape(-1)
    period = protocol.period
    cache = GeneratorCache(drive, d_config)

    n, stride = _steps(cfg, period), cfg.stride
    coarse = _rk4_run(cache, y0, n, cfg.periods, stride)
    # max_refinements = 0 accepts the base grid unchecked
    refinement, accepted = 0, cfg.max_refinements == 0
    while not accepted:
        if refinement == cfg.max_refinements:
            raise StepsizeUnderflow(
                f"no agreement to {cfg.tolerance:.1e}/period after {refinement} refinements")
        if period / (2 * n) < cfg.min_step:
            raise StepsizeUnderflow(f"step {period / (2 * n):.3e} below min_step {cfg.min_step:.3e}")
        fine = _rk4_run(cache, y0, 2 * n, cfg.periods, 2 * stride)
        dev = max_abs(fine.samples - coarse.samples)
        refinement += 1
        logger.info("refinement %d: %d steps/period, deviation %.3e", refinement, 2 * n, dev)
        logger.debug("generator cache holds %d entries", len(cache))
        n, stride, coarse = 2 * n, 2 * stride, fine
        accepted = dev <= cfg.tolerance * cfg.periods

    times = np.arange(coarse.samples.shape[0]) * stride * period / n
    bad = np.nonzero(coarse.min_eigenvalues < -POSITIVITY_TOL)[0]
    if bad.size:
        i = int(bad[0])
        raise PositivityViolation(
            f"density matrix eigenvalue {coarse.min_eigenvalues[i]:.3e} "
            f"in the steps up to t={times[i]:.6g}")
    return _observe(cfg, protocol, drive, coarse, times, period, n, refinement)


def _observe(cfg: SimConfig, protocol: Protocol, drive: Protocol, run: _Run,
             times: np.ndarray, period: float, n: int, refinements: int) -> Trajectory:
    dim = protocol.dim
    states, rhos, bases = [], [], []
    distances, herm_err = [], []
    prev: SpectralDecomposition | None = None
    prev_e: SpectralDecomposition | None = None
    for t, y in zip(times, run.samples):
        rho = y.reshape(dim, dim)
        basis = eigendecompose(protocol.hamiltonian(t), time=t)
        if prev is not None:
            basis = gauge_align(prev, basis)
        if cfg.with_cd:
            basis_e = eigendecompose(drive.hamiltonian(t), time=t)
            if prev_e is not None:
                basis_e = gauge_align(prev_e, basis_e)
            state = basis_transform(vectorize(rho, basis_e), basis_e, basis)
            prev_e = basis_e
        else:
            state = vectorize(rho, basis)
        prev = basis

        states.append(state)
        rhos.append(rho)
        bases.append(basis)
        distances.append(trace_distance(rho, gibbs_state(basis, cfg.beta)))
        herm_err.append(max_abs(rho - dagger(rho)))

    return Trajectory(
        times=times,
        states=states,
        distances=np.array(distances),
        trace_errors=run.trace_errors,
        hermiticity_errors=np.array(herm_err),
        min_eigenvalues=run.min_eigenvalues,
        rhos=rhos,
        bases=bases,
        period=period,
        steps_per_period=n,
        refinements=refinements,
        with_cd=cfg.with_cd,
        metadata={"config": cfg.to_dict()},
    )


def steady_state(traj: Trajectory) -> tuple[float, float]:
    """Time-averaged and maximal d(t) over the last full period."""
    last = traj.periods - 1
    return traj.period_average(last), traj.period_max(last)


@dataclass
class ScanRow:
    axis: str
    value: float
    d_avg: float
    d_max: float
    with_cd: bool
    error: str = ""


def _scan_config(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    key = "omega" if axis == "omega" else "h0"
    periods = max(cfg.periods, cfg.transient_periods + 1)
    return dataclasses.replace(cfg, **{key: float(value)}, periods=periods)


def _scan_point(args: tuple[SimConfig, str, float]) -> ScanRow:
    cfg, axis, value = args
    try:
        d_avg, d_max = steady_state(integrate(cfg))
        return ScanRow(axis, value, d_avg, d_max, cfg.with_cd)
    except Exception as e:  # recorded in the row, the scan goes on
        logger.warning("scan point %s=%g failed: %s", axis, value, e)
        return ScanRow(axis, value, math.nan, math.nan, cfg.with_cd, f"{type(e).__name__}: {e}")


def scan(cfg: SimConfig, axis: str | None = None, grid: list[float] | None = None,
         jobs: int | None = None) -> list[ScanRow]:
    """Steady-state statistics over a grid of omega or h values, in grid order."""
    axis = axis or cfg.scan_axis
    grid = list(grid if grid is not None else cfg.scan_grid)
    cfg = dataclasses.replace(cfg, scan_axis=axis, scan_grid=grid).validate()
    jobs = jobs or cfg.jobs
    work = [(_scan_config(cfg, axis, v), axis, v) for v in grid]
    logger.info("scanning %s over %d points with %d worker(s)", axis, len(grid), jobs)
    if jobs == 1:
        return [_scan_point(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_scan_point, work))


@dataclass
class ExpandRow:
    time: float
    expansion: StateVec
    integrated: StateVec
    difference: float


def expansion_at(protocol: Protocol, t: float, d_config: DissipatorSpec, order: int,
                 with_cd: bool = False, fd_step: float | None = None) -> ExpansionResult:
    if order == 0:
        return zeroth_order(protocol, t, d_config)
    if order == 1:
        return first_order(protocol, t, d_config, with_cd, fd_step)
    raise ConfigError(f"order must be 0 or 1 here, got {order}")


def expand(cfg: SimConfig, order: int, traj: Trajectory | None = None) -> list[ExpandRow]:
    """Perturbative state beside the integrated one for samples after the transient."""
    if order not in (0, 1, 2):
        raise ConfigError(f"order must be 0, 1 or 2, got {order}")
    traj = traj or integrate(cfg)
    protocol = build_protocol(cfg)
    d_config = build_dissipator(cfg)
    keep = [i for i, t in enumerate(traj.times) if t >= cfg.transient_periods * traj.period - 1e-12]

    if order == 2:
        results = second_order(protocol, traj.times, d_config, cfg.with_cd, fd_step=cfg.fd_step)
    else:
        results = {i: expansion_at(protocol, float(traj.times[i]), d_config, order,
                                   cfg.with_cd, cfg.fd_step) for i in keep}

    rows = []
    for i in keep:
        res = results[i]
        lab = devectorize(res.state(), res.basis)
        rows.append(ExpandRow(
            time=float(traj.times[i]),
            expansion=vectorize(lab, traj.bases[i]),
            integrated=traj.states[i],
            difference=float(np.linalg.norm(lab - traj.rhos[i])),
        ))
    return rows
