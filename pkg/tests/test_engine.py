"""Tests for time-domain integration, scans and expansion comparisons."""

import dataclasses

import numpy as np
import pytest
from periodic_gkls import SimConfig, expand, integrate, scan
from periodic_gkls import engine, liouville
from periodic_gkls.core import ConfigError, PositivityViolation, StepsizeUnderflow
from periodic_gkls.engine import (
    GeneratorCache, _rk4_run, _steps, build_dissipator, build_protocol, initial_state, steady_state,
)
from periodic_gkls.protocols import (
    ConstantProtocol, NutatingProtocol, RotatingProtocol, SplineProtocol,
)


# ── builders ────────────────────────────────────────────────────────────


@pytest.mark.parametrize("protocol,cls", [
    ("p1", RotatingProtocol),
    ("p2", NutatingProtocol),
    ("static", ConstantProtocol),
    ("spline", SplineProtocol),
], ids=["p1", "p2", "static", "spline"])
def test_build_protocol(protocol, cls):
    assert isinstance(build_protocol(SimConfig(protocol=protocol)), cls)


def test_build_dissipator_uses_gap_rate():
    spec = build_dissipator(SimConfig(gamma_gap=0.3, gamma_zero=0.1, h0=2.0))
    rf = spec.channels[0].rates
    assert rf(2.0) == pytest.approx(0.3)
    assert rf(0.0) == pytest.approx(0.1)


def test_default_initial_state_is_ground_state():
    cfg = SimConfig()
    protocol = build_protocol(cfg)
    rho = initial_state(cfg, protocol)
    h = protocol.hamiltonian(0.0)
    assert np.trace(rho @ h).real == pytest.approx(-0.5 * cfg.h0)


def test_initial_state_must_be_positive():
    cfg = SimConfig(initial_pop=[1.0, 0.0], initial_coh=[[0.9, 0.0], [0.9, 0.0]])
    with pytest.raises(ConfigError):
        initial_state(cfg, build_protocol(cfg))


def test_generator_cache_shares_refined_grids(reservoir):
    cache = GeneratorCache(RotatingProtocol(1.0, 0.2), reservoir("z"))
    a = cache.get(1, 10)
    assert cache.get(2, 20) is a
    assert cache.get(21, 10) is a
    assert len(cache) == 1


def test_steps_respect_max_step_and_stride():
    cfg = SimConfig(steps_per_period=100, max_step=0.05, stride=20)
    assert _steps(cfg, 2 * np.pi) == 140


# ── integrate ───────────────────────────────────────────────────────────


@pytest.fixture
def static_run(quick_config):
    cfg = quick_config(protocol="static", periods=20, initial_pop=[0.0, 1.0])
    return cfg, integrate(cfg)


def test_static_relaxes_to_gibbs(static_run):
    _, traj = static_run
    assert traj.distances[0] > 0.5
    assert traj.distances[-1] < 1e-6


def test_conservation(static_run):
    _, traj = static_run
    assert traj.trace_errors.max() < 1e-9
    assert traj.hermiticity_errors.max() < 1e-10
    assert traj.min_eigenvalues.min() > -1e-9


def test_trajectory_grid(static_run):
    cfg, traj = static_run
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(cfg.periods * traj.period)
    assert traj.periods == cfg.periods
    assert traj.steps_per_period % cfg.stride == 0
    assert len(traj.states) == len(traj.times) == len(traj.rhos)
    assert traj.metadata["config"]["protocol"] == "static"


def test_window_average_of_constant_tail(static_run):
    _, traj = static_run
    avg, peak = steady_state(traj)
    assert avg <= peak < 1e-6


def test_base_grid_accepted_without_refinement(quick_config):
    traj = integrate(quick_config(protocol="static", max_refinements=0))
    assert traj.refinements == 0


def test_refinement_gives_up(quick_config):
    cfg = quick_config(protocol="static", steps_per_period=20, max_step=10.0, tolerance=1e-15,
                       max_refinements=1)
    with pytest.raises(StepsizeUnderflow):
        integrate(cfg)


def test_min_step_underflow(quick_config):
    cfg = quick_config(protocol="static", steps_per_period=20, max_step=10.0, tolerance=1e-15,
                       min_step=1.0)
    with pytest.raises(StepsizeUnderflow):
        integrate(cfg)


def test_cd_states_in_hamiltonian_basis(quick_config):
    cfg = quick_config(omega=0.2, with_cd=True)
    traj = integrate(cfg)
    for state, rho, basis in zip(traj.states[::10], traj.rhos[::10], traj.bases[::10]):
        assert np.allclose(state.matrix(), basis.to_frame(rho), atol=1e-12)


def _anti_damped(drive, t, d_config):
    unitary = liouville.unitary_superoperator(drive.hamiltonian(t))
    return 2.0 * unitary - liouville.lab_generator(drive, t, d_config)


def test_negative_population_raises(quick_config, monkeypatch):
    monkeypatch.setattr(engine, "lab_generator", _anti_damped)
    with pytest.raises(PositivityViolation, match="eigenvalue"):
        integrate(quick_config(protocol="static", max_refinements=0))


def test_extremes_cover_every_step(reservoir):
    cache = GeneratorCache(ConstantProtocol(1.0, 0.3, 0.0), reservoir("x"))
    y0 = np.diag([0.0, 1.0]).astype(complex).reshape(-1)
    every = _rk4_run(cache, y0, n=40, periods=1, stride=1)
    sampled = _rk4_run(cache, y0, n=40, periods=1, stride=10)
    assert len(sampled.samples) == len(sampled.min_eigenvalues) == len(sampled.trace_errors) == 5
    assert np.allclose(sampled.samples, every.samples[::10])
    grouped = every.min_eigenvalues[1:].reshape(4, 10).min(axis=1)
    assert np.allclose(sampled.min_eigenvalues[1:], grouped, atol=1e-14)
    assert sampled.min_eigenvalues[0] == pytest.approx(0.0, abs=1e-14)


def test_trajectory_extremes_per_sample(static_run):
    _, traj = static_run
    assert traj.min_eigenvalues.shape == traj.trace_errors.shape == traj.times.shape


# ── scan / expand ───────────────────────────────────────────────────────


def test_scan_keeps_grid_order(quick_config):
    cfg = quick_config(protocol="static", transient_periods=1)
    rows = scan(cfg, axis="h", grid=[2.0, 1.0])
    assert [r.value for r in rows] == [2.0, 1.0]
    assert all(not r.error for r in rows)
    assert all(r.d_avg <= r.d_max for r in rows)


def test_scan_reports_failures(quick_config):
    cfg = quick_config(protocol="static", transient_periods=1, max_refinements=1,
                       tolerance=1e-15, steps_per_period=20, max_step=10.0)
    rows = scan(cfg, axis="h", grid=[1.0])
    assert rows[0].error.startswith("StepsizeUnderflow")
    assert np.isnan(rows[0].d_avg)


def test_scan_survives_unexpected_errors(quick_config, monkeypatch):
    def broken(cfg):
        raise RuntimeError("solver blew up")
    monkeypatch.setattr(engine, "integrate", broken)
    rows = scan(quick_config(protocol="static"), axis="h", grid=[1.0, 2.0], jobs=1)
    assert [r.value for r in rows] == [1.0, 2.0]
    assert all(r.error == "RuntimeError: solver blew up" for r in rows)
    assert all(np.isnan(r.d_avg) for r in rows)


def test_expand_skips_transient(quick_config):
    cfg = quick_config(omega=0.2, periods=3, transient_periods=2)
    traj = integrate(cfg)
    rows = expand(cfg, order=1, traj=traj)
    assert rows
    assert min(r.time for r in rows) >= 2 * traj.period - 1e-9


@pytest.mark.parametrize("order", [0, 1, 2], ids=["order0", "order1", "order2"])
def test_expand_orders_close_in_slow_regime(quick_config, order):
    cfg = quick_config(omega=0.05, periods=2, transient_periods=1)
    rows = expand(cfg, order=order)
    assert max(r.difference for r in rows) < 0.05


def test_expand_rejects_order(quick_config):
    with pytest.raises(ConfigError):
        expand(quick_config(protocol="static"), order=3)


# ── acceptance runs ─────────────────────────────────────────────────────


def _fig1(**overrides):
    base = dict(protocol="p1", h0=1.0, beta=1.0, jump="z", gamma_gap=0.5, gamma_zero=0.0,
                initial_pop=[1.0, 0.0], periods=10, tolerance=1e-7)
    base.update(overrides)
    return SimConfig(**base).validate()


@pytest.mark.slow
def test_counterdiabatic_term_reduces_distance():
    plain = integrate(_fig1(omega=0.05)).window_average(5, 10)
    cd = integrate(_fig1(omega=0.05, with_cd=True)).window_average(5, 10)
    assert cd < plain < 0.05


@pytest.mark.slow
def test_fast_driving_degrades_counterdiabatic_run():
    slow = integrate(_fig1(omega=0.05, with_cd=True)).window_average(5, 10)
    fast = integrate(_fig1(omega=1.0, with_cd=True)).window_average(5, 10)
    assert fast > slow


@pytest.mark.slow
def test_jump_choice_barely_matters_when_slow():
    z = integrate(_fig1(protocol="p2", omega=0.05, jump="z")).window_average(5, 10)
    x = integrate(_fig1(protocol="p2", omega=0.05, jump="x")).window_average(5, 10)
    assert abs(z - x) / max(z, x) < 0.25


@pytest.mark.slow
def test_counterdiabatic_distance_falls_with_splitting():
    rows = scan(_fig1(protocol="p2", with_cd=True, periods=6), axis="h", grid=[0.5, 1.0, 2.0, 4.0])
    values = [r.d_avg for r in rows]
    assert all(not r.error for r in rows)
    assert all(b <= a for a, b in zip(values, values[1:]))


@pytest.mark.slow
def test_counterdiabatic_distance_grows_with_omega():
    rows = scan(_fig1(protocol="p2", with_cd=True, periods=6), axis="omega", grid=[0.02, 0.05, 0.1, 0.2, 0.5])
    values = [r.d_avg for r in rows]
    assert all(b >= a for a, b in zip(values, values[1:]))


@pytest.mark.slow
def test_limit_cycle_forgets_initial_state():
    a = integrate(_fig1(omega=0.05))
    b = integrate(dataclasses.replace(_fig1(omega=0.05), initial_pop=[0.3, 0.7],
                                      initial_coh=[[0.2, 0.1], [0.2, -0.1]]))
    assert np.abs(a.distances[-1] - b.distances[-1]) < 1e-6
    idx = a.window(9, 10)
    assert np.abs(a.distances[idx] - b.distances[idx]).max() < 1e-6


@pytest.mark.slow
def test_limit_cycle_is_periodic():
    traj = integrate(_fig1(omega=0.05))
    last, prev = traj.window(9, 10), traj.window(8, 9)
    assert np.abs(traj.distances[last] - traj.distances[prev]).max() < 1e-4
