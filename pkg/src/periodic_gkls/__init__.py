"""Periodically driven open quantum systems under a thermodynamically consistent GKLS equation."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("periodic-gkls")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0+unknown"

from .core import CheckResult, Fault, GKLSError, Status, inject
from .config import SimConfig, load_config, PRESETS
from .engine import Trajectory, expand, integrate, scan
from .checks import validate
from .cli import main

__all__ = [
    "CheckResult",
    "Fault",
    "GKLSError",
    "Status",
    "inject",
    "SimConfig",
    "load_config",
    "PRESETS",
    "Trajectory",
    "integrate",
    "scan",
    "expand",
    "validate",
    "main",
    "__version__",
]
