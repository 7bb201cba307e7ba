#!/usr/bin/env python3
"""Command-line entry point for the periodic GKLS simulator."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Iterator, TextIO

import numpy as np

from . import __version__
from .checks import validate
from .config import CATEGORY_ORDER, CHECKS_META, PRESETS, SimConfig, load_config
from .core import CheckResult, ConfigError, Fault, GKLSError
from .engine import expand, integrate, scan
from .liouville import StateVec, coherence_pairs

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
TRACE_TOL = 1e-9


def _num(x: float) -> str:
    return format(float(x), ".17g")


@contextlib.contextmanager
def _open_out(path: Path | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            yield f


def write_csv(out: TextIO, cfg: SimConfig, header: list[str], rows: list[list[Any]],
              extra: dict[str, Any] | None = None) -> None:
    """CSV with '#' metadata lines: version, seed and the full config echo."""
    out.write(f"# periodic-gkls {__version__}\n")
    out.write(f"# seed: {cfg.seed}\n")
    for key, val in (extra or {}).items():
        out.write(f"# {key}: {val}\n")
    out.write(f"# config: {json.dumps(cfg.to_dict(), sort_keys=True)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _state_header(prefix: str, dim: int) -> list[str]:
    cols = [f"{prefix}pop_{n + 1}" for n in range(dim)]
    for m, n in coherence_pairs(dim):
        cols += [f"{prefix}re_coh_{m + 1}{n + 1}", f"{prefix}im_coh_{m + 1}{n + 1}"]
    return cols


def _state_cells(state: StateVec) -> list[float]:
    cells = [float(p.real) for p in state.pop]
    for c in state.coh:
        cells += [float(c.real), float(c.imag)]
    return cells


# -- info output -------------------------------------------------------------

def _group_checks(cfg: SimConfig) -> dict[str, list[tuple[str, str, bool]]]:
    categories: dict[str, list[tuple[str, str, bool]]] = {}
    for name in CHECKS_META:
        desc, cat = CHECKS_META[name]
        categories.setdefault(cat, []).append((name, desc, cfg.is_enabled(name)))
    return categories


def _print_checks(use_color: bool = True):
    """Print all validation checks grouped by category."""
    BOLD = '\033[1m' if use_color else ''
    DIM = '\033[2m' if use_color else ''
    RST = '\033[0m' if use_color else ''

    categories = _group_checks(SimConfig())
    for i, cat in enumerate(c for c in CATEGORY_ORDER if c in categories):
        if i:
            print()
        print(f"{BOLD}{cat}:{RST}")
        for name, desc, _ in categories[cat]:
            print(f"  {name:<22} {DIM}{desc}{RST}")


def _toml_value(val: Any) -> str:
    if isinstance(val, bool):
        return str(val).lower()
    if isinstance(val, str):
        return json.dumps(val)
    return json.dumps(val) if isinstance(val, list) else repr(val)


def _print_config(cfg: SimConfig, use_color: bool = True):
    """Print the effective configuration as TOML."""
    defaults = SimConfig().to_dict()
    DIM = '\033[2m' if use_color else ''
    GREEN = '\033[32m' if use_color else ''
    RED = '\033[31m' if use_color else ''
    CYAN = '\033[36m' if use_color else ''
    RST = '\033[0m' if use_color else ''

    print(f"{DIM}# Effective configuration (copy to periodic-gkls.toml){RST}")
    print()
    for key, val in cfg.to_dict().items():
        if key in ("checks", "spline"):
            continue
        if val is None:
            print(f"{DIM}# {key} unset{RST}")
            continue
        color = CYAN if val != defaults[key] else ''
        print(f"{color}{key} = {_toml_value(val)}{RST}")

    print()
    print("[spline]")
    for key, val in cfg.spline.items():
        print(f"{key} = {_toml_value(val)}")

    print()
    print(f"{DIM}# Checks: true = enabled, false = disabled{RST}")
    print("[checks]")
    categories = _group_checks(cfg)
    for cat in CATEGORY_ORDER:
        print(f"{DIM}# {cat}{RST}")
        for name, desc, enabled in categories.get(cat, []):
            color = GREEN if enabled else RED
            code = f'"{name}" = {str(enabled).lower()}'
            print(f"{color}{code:<32}{RST}{DIM}# {desc}{RST}")


# -- subcommands -------------------------------------------------------------

def _run_simulate(args, cfg: SimConfig) -> int:
    traj = integrate(cfg)
    dim = traj.states[0].dim
    header = ["t", "d"] + _state_header("", dim) + ["trace_err"]
    rows = [[float(t), float(d)] + _state_cells(s) + [float(e)]
            for t, d, s, e in zip(traj.times, traj.distances, traj.states, traj.trace_errors)]
    with _open_out(args.out) as out:
        write_csv(out, cfg, header, rows, extra={
            "steps_per_period": traj.steps_per_period,
            "refinements": traj.refinements,
        })
    worst = float(traj.trace_errors.max())
    if worst > TRACE_TOL:
        print(f"trace error {worst:.3e} exceeds {TRACE_TOL:.0e}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _run_scan(args, cfg: SimConfig) -> int:
    grid = [float(v) for v in args.grid.split(",")] if args.grid else None
    rows = scan(cfg, axis=args.axis, grid=grid, jobs=args.jobs)
    axis = rows[0].axis if rows else cfg.scan_axis
    with _open_out(args.out) as out:
        write_csv(out, cfg, [axis, "d_avg", "d_max", "with_cd", "error"],
                  [[r.value, r.d_avg, r.d_max, str(r.with_cd).lower(), r.error] for r in rows])
    return EXIT_FAIL if any(r.error for r in rows) else EXIT_OK


def _run_expand(args, cfg: SimConfig) -> int:
    rows = expand(cfg, args.order)
    dim = rows[0].expansion.dim if rows else 2
    header = (["t", "order"] + _state_header("exp_", dim) + _state_header("int_", dim)
              + ["diff_norm"])
    cells = [[r.time, args.order] + _state_cells(r.expansion) + _state_cells(r.integrated)
             + [r.difference] for r in rows]
    with _open_out(args.out) as out:
        write_csv(out, cfg, header, cells)
    return EXIT_OK


def _print_report(results: list[CheckResult], use_color: bool) -> None:
    G, R, W, DIM, RST = (('\033[32m', '\033[91m', '\033[97m', '\033[2m', '\033[0m')
                         if use_color else ('', '', '', '', ''))
    for r in results:
        color = G if r.passed else R
        line = f"{color}{r.status.value:<4}{RST} {r.name:<22} residual {r.residual:.3e}  {DIM}(threshold {r.threshold:.1e}){RST}"
        print(line)
        if r.message:
            print(f"     {DIM}{r.message}{RST}")
    failed = sum(not r.passed for r in results)
    print(f"\n{W}Checks: {len(results)}  Failed: {R if failed else G}{failed}{RST}")


def _run_validate(args, cfg: SimConfig, use_color: bool) -> int:
    faults = [Fault(f) for f in args.inject or ()]
    results = validate(cfg, only=args.check, faults=faults)
    if args.json:
        report = {
            "version": __version__,
            "faults": [f.value for f in faults],
            "passed": all(r.passed for r in results),
            "checks": [{
                "name": r.name, "category": r.category, "status": r.status.value,
                "residual": r.residual, "threshold": r.threshold, "message": r.message,
            } for r in results],
        }
        print(json.dumps(report, indent=2))
    else:
        _print_report(results, use_color)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# -- argument parsing --------------------------------------------------------

EPILOG = """\
Configuration:
  Auto-detected files (in order): .periodic-gkls.toml, periodic-gkls.toml,
  periodic-gkls.json, or [tool.periodic-gkls] in pyproject.toml

  Config file format (TOML or JSON):
    protocol = "p1"
    omega = 0.05
    [checks]
    "expansion.order" = false

  Priority: CLI flags > config file > preset > defaults

Presets:
  fig1  p1 protocol, beta h = 1, Z jump, gamma(h)/h = 0.5, gamma(0) = 0
  fig2  p2 protocol, same reservoir and initial state as fig1
  fig3  p2 protocol, fig1 reservoir, counterdiabatic term, omega scan grid

Exit codes:
  0  Success
  1  Validation or physics-invariant failure
  2  Configuration error
"""


def _config_parent() -> argparse.ArgumentParser:
    # suppressed defaults let the options appear before or after COMMAND
    parent = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    cfg_group = parent.add_argument_group('Config')
    cfg_group.add_argument('--preset', choices=list(PRESETS.keys()), metavar='NAME',
                           help='use a preset: fig1, fig2, fig3')
    cfg_group.add_argument('--config', type=Path, metavar='FILE',
                           help='path to TOML or JSON config file')

    sim_group = parent.add_argument_group('Simulation')
    sim_group.add_argument('--protocol', choices=['p1', 'p2', 'static', 'spline'],
                           help='driving protocol [default: p1]')
    sim_group.add_argument('--omega', type=float, metavar='W', help='driving frequency')
    sim_group.add_argument('--h0', type=float, metavar='H', help='level splitting')
    sim_group.add_argument('--beta', type=float, metavar='B', help='inverse temperature')
    sim_group.add_argument('--jump', choices=['z', 'x'], help='jump operator')
    sim_group.add_argument('--cd', dest='with_cd', action='store_true',
                           help='add the counterdiabatic term')
    sim_group.add_argument('--periods', type=int, metavar='N', help='periods to simulate')
    sim_group.add_argument('--tolerance', type=float, metavar='TOL',
                           help='step-halving tolerance per period [default: 1e-9]')
    sim_group.add_argument('--seed', type=int, metavar='N', help='random seed')

    out_group = parent.add_argument_group('Output')
    out_group.add_argument('-v', '--verbose', action='count',
                           help='log progress (-vv for debug detail)')
    out_group.add_argument('--no-color', action='store_true', help='disable colored output')
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _config_parent()
    ap = argparse.ArgumentParser(
        prog='periodic-gkls',
        description='Periodically driven open quantum systems under a thermodynamically '
                    'consistent GKLS equation.',
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[parent],
    )

    info_group = ap.add_argument_group('Info')
    info_group.add_argument('--list-checks', action='store_true',
                            help='list all validation checks with descriptions')
    info_group.add_argument('--show-config', action='store_true',
                            help='show effective configuration and exit')
    info_group.add_argument('--version', action='store_true',
                            help='show program\'s version number and exit')

    sub = ap.add_subparsers(dest='command', metavar='COMMAND')

    sim = sub.add_parser('simulate', parents=[parent], help='integrate one configuration')
    sim.add_argument('--out', type=Path, metavar='CSV', help='output file [default: stdout]')

    sc = sub.add_parser('scan', parents=[parent], help='steady-state d(t) over a grid')
    sc.add_argument('--axis', choices=['omega', 'h'], help='scanned parameter [default: omega]')
    sc.add_argument('--grid', metavar='LIST', help='comma-separated grid values')
    sc.add_argument('--jobs', type=int, metavar='N', help='worker processes [default: 1]')
    sc.add_argument('--out', type=Path, metavar='CSV', help='output file [default: stdout]')

    ex = sub.add_parser('expand', parents=[parent], help='slow-driving expansion vs integration')
    ex.add_argument('--order', type=int, choices=[0, 1, 2], default=1, help='expansion order')
    ex.add_argument('--out', type=Path, metavar='CSV', help='output file [default: stdout]')

    va = sub.add_parser('validate', parents=[parent], help='run the invariant suite')
    va.add_argument('--check', action='append', choices=list(CHECKS_META), metavar='NAME',
                    help='run only this check (repeatable)')
    va.add_argument('--inject', action='append', choices=[f.value for f in Fault], metavar='FAULT',
                    help='run under a deliberate sign error: ' + ', '.join(f.value for f in Fault))
    va.add_argument('--json', action='store_true', help='emit a JSON report')
    return ap


def _setup_logging(verbosity: int) -> None:
    if verbosity <= 0:
        return
    logging.basicConfig(
        level=logging.DEBUG if verbosity > 1 else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


_CONFIG_OPTIONS = ("protocol", "omega", "h0", "beta", "jump", "with_cd", "periods", "tolerance", "seed")


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    opts = {name: getattr(args, name, None) for name in _CONFIG_OPTIONS}

    if args.version:
        print(f'periodic-gkls {__version__}')
        return EXIT_OK

    # --no-color flag > NO_COLOR env > FORCE_COLOR env > isatty()
    if getattr(args, "no_color", False) or os.environ.get('NO_COLOR'):
        use_color = False
    elif os.environ.get('FORCE_COLOR'):
        use_color = True
    else:
        use_color = sys.stdout.isatty()

    if args.list_checks:
        _print_checks(use_color=use_color)
        return EXIT_OK

    _setup_logging(getattr(args, "verbose", 0))

    R, RST = ('\033[91m', '\033[0m') if use_color else ('', '')
    try:
        cfg = load_config(
            config_path=getattr(args, "config", None),
            preset=getattr(args, "preset", None),
            **opts,
        )
        if args.show_config:
            _print_config(cfg, use_color=use_color)
            return EXIT_OK
        if args.command is None:
            ap.error("COMMAND is required")
        if args.command == 'simulate':
            return _run_simulate(args, cfg)
        if args.command == 'scan':
            return _run_scan(args, cfg)
        if args.command == 'expand':
            return _run_expand(args, cfg)
        return _run_validate(args, cfg, use_color)
    except ConfigError as e:
        print(f"{R}config error: {e}{RST}", file=sys.stderr)
        return EXIT_CONFIG
    except GKLSError as e:
        print(f"{R}{type(e).__name__}: {e}{RST}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == '__main__':
    sys.exit(main())
