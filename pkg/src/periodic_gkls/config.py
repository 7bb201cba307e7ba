"""Configuration system for the periodic GKLS simulator."""

from __future__ import annotations

import copy
import json
import math
import numbers
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .core import ConfigError

# Python 3.11+ has tomllib built-in, fallback for 3.10
try:
    import tomllib
except ImportError:
    import tomli as tomllib  # type: ignore


# Check metadata: (short_description, category)
CHECKS_META: dict[str, tuple[str, str]] = {
    # Spectral toolkit
    "eigen.reconstruct": ("Jacobi eigendecomposition reconstructs H", "Spectral"),
    "eigen.derivative": ("Eigenvector derivatives match perturbation theory", "Spectral"),
    "metric.triangle": ("Trace distance obeys the triangle inequality", "Spectral"),
    # Dissipator
    "diss.stationary": ("Gibbs state is stationary under the dissipator", "Dissipator"),
    "diss.trace": ("Dissipator output is traceless and Hermitian", "Dissipator"),
    "diss.ladder": ("Projected jumps lower energy by their gap", "Dissipator"),
    "diss.kms": ("Transition rates satisfy detailed balance", "Dissipator"),
    # Generator
    "blocks.colsum": ("Rate matrix has zero column sums", "Generator"),
    "blocks.oracle": ("Block generator equals the brute-force superoperator", "Generator"),
    "blocks.cancel": ("Counterdiabatic term cancels the gauge couplings", "Generator"),
    # Counterdiabatic
    "cd.closed_form": ("Generic gauge potential equals the Bloch closed form", "Counterdiabatic"),
    # Two-level oracles
    "twolevel.rates": ("Closed-form Gamma, Gamma2 match the generic blocks", "Analytic"),
    "twolevel.first_order": ("Closed-form first-order state matches the expansion", "Analytic"),
    # Expansion
    "expansion.order": ("Integration minus first order scales as omega^2", "Expansion"),
}

CATEGORY_ORDER = ["Spectral", "Dissipator", "Generator", "Counterdiabatic", "Analytic", "Expansion"]

PROTOCOLS = ("p1", "p2", "static", "spline")
JUMPS = ("z", "x")
EXTRAPOLATIONS = ("none", "constant", "linear")
SCAN_AXES = ("omega", "h")
DEFAULT_SCAN_GRID = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0]


@dataclass
class SimConfig:
    """Simulation configuration.

    `initial_pop` is listed in ascending energy order (ground state first),
    in the eigenbasis of H(0). `initial_coh` holds [re, im] pairs over the
    coherence pairs (m, n), m != n, in row-major order; empty means zero.
    """

    # Protocol
    protocol: str = "p1"
    h0: float = 1.0
    omega: float = 0.05
    theta: float = math.pi / 4
    phi: float = 0.0
    spline: dict[str, Any] = field(default_factory=lambda: {
        "h": [1.0, 1.0, 1.0, 1.0],
        "theta": [0.6, 0.9, 1.1, 0.8],
        "phi": [0.0, 0.3, -0.2, 0.1],
        "winding": 1,
    })

    # Reservoir
    beta: float = 1.0
    jump: str = "z"
    gamma_gap: float = 0.5
    gamma_zero: float = 0.0
    rate_extrapolation: str = "constant"
    with_cd: bool = False

    # Integrator
    steps_per_period: int = 2000
    max_step: float = 0.05
    tolerance: float = 1e-9
    max_refinements: int = 5
    min_step: float = 1e-6
    periods: int = 10
    stride: int = 20
    transient_periods: int = 5
    initial_pop: list[float] = field(default_factory=lambda: [1.0, 0.0])
    initial_coh: list[list[float]] = field(default_factory=list)
    fd_step: float | None = None

    # Runs
    seed: int = 12345
    trials: int = 100
    jobs: int = 1
    scan_axis: str = "omega"
    scan_grid: list[float] = field(default_factory=lambda: list(DEFAULT_SCAN_GRID))

    checks: dict[str, bool] = field(default_factory=lambda: {name: True for name in CHECKS_META})

    def is_enabled(self, check: str) -> bool:
        """Check if a validation check is enabled."""
        return self.checks.get(check, True)

    def validate(self) -> "SimConfig":
        """Raise ConfigError on values no run can use."""
        _check_types(self)
        _choice("protocol", self.protocol, PROTOCOLS)
        _choice("jump", self.jump, JUMPS)
        _choice("rate_extrapolation", self.rate_extrapolation, EXTRAPOLATIONS)
        _choice("scan_axis", self.scan_axis, SCAN_AXES)
        for name in ("h0", "omega", "tolerance", "max_step", "min_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("gamma_gap", "gamma_zero", "beta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("periods", "steps_per_period", "stride", "trials", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.transient_periods < 0 or self.max_refinements < 0:
            raise ConfigError("transient_periods and max_refinements must be >= 0")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ConfigError(f"fd_step must be positive, got {self.fd_step}")
        if not self.scan_grid or min(self.scan_grid) <= 0:
            raise ConfigError("scan_grid must be a nonempty list of positive values")
        if len(self.initial_pop) != 2:
            raise ConfigError("two-level protocols need two initial populations")
        if min(self.initial_pop) < 0 or abs(sum(self.initial_pop) - 1.0) > 1e-9:
            raise ConfigError(f"initial_pop must be a probability vector, got {self.initial_pop}")
        if self.initial_coh and len(self.initial_coh) != 2:
            raise ConfigError("initial_coh needs 2 [re, im] pairs")
        unknown = set(self.checks) - set(CHECKS_META)
        if unknown:
            raise ConfigError(f"unknown checks: {', '.join(sorted(unknown))}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _choice(name: str, value: str, allowed: tuple[str, ...]) -> None:
    if not isinstance(value, str) or value not in allowed:
        raise ConfigError(f"{name} must be one of {', '.join(allowed)}, got {value!r}")


_INTEGERS = ("steps_per_period", "max_refinements", "periods", "stride", "transient_periods",
             "seed", "trials", "jobs")
_NUMBERS = ("h0", "omega", "theta", "phi", "beta", "gamma_gap", "gamma_zero", "max_step",
            "tolerance", "min_step")
_SPLINE_KEYS = ("h", "theta", "phi", "winding")


def _is_integer(value: Any) -> bool:
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    # bool is an int subclass; reject it explicitly
    return (isinstance(value, numbers.Real) and not isinstance(value, bool)
            and math.isfinite(value))


def _number_list(name: str, value: Any) -> None:
    if not isinstance(value, (list, tuple)) or not all(_is_number(x) for x in value):
        raise ConfigError(f"{name} must be a list of numbers, got {value!r}")


def _check_types(cfg: SimConfig) -> None:
    """Reject wrongly typed values before any range check compares them."""
    for name in _INTEGERS:
        if not _is_integer(getattr(cfg, name)):
            raise ConfigError(f"{name} must be an integer, got {getattr(cfg, name)!r}")
    for name in _NUMBERS:
        if not _is_number(getattr(cfg, name)):
            raise ConfigError(f"{name} must be a finite number, got {getattr(cfg, name)!r}")
    if cfg.fd_step is not None and not _is_number(cfg.fd_step):
        raise ConfigError(f"fd_step must be a finite number, got {cfg.fd_step!r}")
    if not isinstance(cfg.with_cd, bool):
        raise ConfigError(f"with_cd must be true or false, got {cfg.with_cd!r}")

    _number_list("initial_pop", cfg.initial_pop)
    _number_list("scan_grid", cfg.scan_grid)
    if not isinstance(cfg.initial_coh, (list, tuple)):
        raise ConfigError(f"initial_coh must be a list of [re, im] pairs, got {cfg.initial_coh!r}")
    for pair in cfg.initial_coh:
        _number_list("initial_coh entry", pair)
        if len(pair) != 2:
            raise ConfigError(f"initial_coh entries are [re, im] pairs, got {pair!r}")

    if not isinstance(cfg.checks, dict) or not all(isinstance(v, bool) for v in cfg.checks.values()):
        raise ConfigError("checks must be a table of true/false values")
    if not isinstance(cfg.spline, dict):
        raise ConfigError(f"spline must be a table, got {cfg.spline!r}")
    unknown = set(cfg.spline) - set(_SPLINE_KEYS)
    if unknown:
        raise ConfigError(f"unknown spline keys: {', '.join(sorted(unknown))}")
    for key in ("h", "theta", "phi"):
        _number_list(f"spline.{key}", cfg.spline.get(key))
    if not _is_integer(cfg.spline.get("winding", 0)):
        raise ConfigError(f"spline.winding must be an integer, got {cfg.spline.get('winding')!r}")


# Presets (override defaults)
PRESETS: dict[str, dict[str, Any]] = {
    "fig1": {
        "protocol": "p1",
        "h0": 1.0,
        "beta": 1.0,
        "jump": "z",
        "gamma_gap": 0.5,
        "gamma_zero": 0.0,
        "omega": 0.05,
        "initial_pop": [1.0, 0.0],
    },
    # initial state not given for this setting, reuses fig1's
    "fig2": {
        "protocol": "p2",
        "h0": 1.0,
        "beta": 1.0,
        "jump": "z",
        "gamma_gap": 0.5,
        "gamma_zero": 0.0,
        "omega": 0.05,
        "initial_pop": [1.0, 0.0],
    },
    "fig3": {
        "protocol": "p2",
        "h0": 1.0,
        "beta": 1.0,
        "jump": "z",
        "gamma_gap": 0.5,
        "gamma_zero": 0.0,
        "with_cd": True,
        "scan_axis": "omega",
        "scan_grid": list(DEFAULT_SCAN_GRID),
    },
}

CONFIG_FILES = (".periodic-gkls.toml", "periodic-gkls.toml", "periodic-gkls.json")


def load_config(
    config_path: Path | None = None,
    preset: str | None = None,
    **overrides: Any,
) -> SimConfig:
    """
    Load configuration with priority: CLI overrides > config file > preset > defaults.

    Args:
        config_path: Path to a .toml or .json config file
        preset: Preset name ("fig1", "fig2", "fig3")
        **overrides: CLI overrides (omega, with_cd, ...); None values are skipped
    """
    cfg = SimConfig()

    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")

    # 1. CLI preset (lowest priority of the explicit sources)
    if preset:
        _apply_dict(cfg, PRESETS[preset])

    # 2. Config file
    file_data: dict[str, Any] | None = None
    if config_path is not None:
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        file_data = _load_file(config_path)
    else:
        for name in CONFIG_FILES:
            if Path(name).exists():
                file_data = _load_file(Path(name))
                break
        else:
            if Path("pyproject.toml").exists():
                data = _load_file(Path("pyproject.toml"))
                file_data = data.get("tool", {}).get("periodic-gkls")

    # 2b. Preset named inside the file, unless one came from the CLI
    if file_data:
        file_preset = file_data.get("preset")
        if file_preset and not preset:
            if file_preset not in PRESETS:
                raise ConfigError(f"unknown preset {file_preset!r} in config file")
            _apply_dict(cfg, PRESETS[file_preset])
        _apply_dict(cfg, {k: v for k, v in file_data.items() if k != "preset"})

    # 3. CLI overrides
    _apply_dict(cfg, {k: v for k, v in overrides.items() if v is not None})

    return cfg.validate()


def _load_file(path: Path) -> dict[str, Any]:
    """Load a TOML or JSON file, chosen by suffix."""
    try:
        if path.suffix == ".json":
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        else:
            with open(path, "rb") as f:
                data = tomllib.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return data


_FIELDS = {f.name for f in fields(SimConfig)}


def _apply_dict(cfg: SimConfig, data: dict[str, Any]) -> None:
    """Apply dictionary values to config."""
    for key, val in data.items():
        if key == "checks" and isinstance(val, dict):
            cfg.checks.update(val)
        elif key == "spline" and isinstance(val, dict):
            cfg.spline = {**cfg.spline, **val}
        elif key in _FIELDS:
            setattr(cfg, key, copy.deepcopy(val))
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
