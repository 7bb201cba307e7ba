"""Pytest fixtures for periodic GKLS tests."""

import numpy as np
import pytest
from periodic_gkls import SimConfig
from periodic_gkls.dissipator import DissipatorSpec, Extrapolation, RateFunction
from periodic_gkls.twolevel import JUMPS


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def rates():
    """Tabulated rate function with gamma(h = 1) = 0.5."""
    def _rates(beta: float = 1.0, gap: float = 0.5, zero: float = 0.0,
               extrapolation: Extrapolation = Extrapolation.CONSTANT) -> RateFunction:
        return RateFunction.from_table(beta, {1.0: gap}, zero=zero, extrapolation=extrapolation)
    return _rates


@pytest.fixture
def reservoir(rates):
    """Single-channel dissipator for a two-level jump ("z" or "x")."""
    def _reservoir(jump: str = "z", **kwargs) -> DissipatorSpec:
        return DissipatorSpec.single(JUMPS[jump], rates(**kwargs), label=jump)
    return _reservoir


@pytest.fixture
def quick_config():
    """SimConfig tuned for short, loose integrations."""
    def _config(**overrides) -> SimConfig:
        base = dict(tolerance=1e-7, max_refinements=4, periods=2, transient_periods=1)
        base.update(overrides)
        return SimConfig(**base).validate()
    return _config


@pytest.fixture
def in_tmp(tmp_path, monkeypatch):
    """Run from an empty directory so no config file is auto-detected."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def write_config(in_tmp):
    """Write a config file into the working directory and return its path."""
    def _write(text: str, name: str = "run.toml"):
        path = in_tmp / name
        path.write_text(text)
        return path
    return _write
