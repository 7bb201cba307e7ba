"""Tests for the command-line entry point."""

import csv
import json

import pytest
from periodic_gkls import main
from periodic_gkls.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, build_parser
from periodic_gkls.config import CHECKS_META

QUICK = ["--protocol", "static", "--periods", "2", "--tolerance", "1e-7"]


def _rows(path):
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.reader(lines))


def _metadata(path):
    return [line for line in path.read_text().splitlines() if line.startswith("#")]


# ── info flags ──────────────────────────────────────────────────────────


def test_version(in_tmp, capsys):
    assert main(["--version"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("periodic-gkls ")


def test_list_checks(in_tmp, capsys):
    assert main(["--list-checks", "--no-color"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in CHECKS_META:
        assert name in out


def test_show_config(in_tmp, capsys):
    assert main(["--show-config", "--no-color", "--omega", "0.2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "omega = 0.2" in out
    assert '"diss.kms" = true' in out


def test_missing_command(in_tmp):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_bad_choice(in_tmp):
    with pytest.raises(SystemExit) as exc:
        main(["--preset", "fig9", "simulate"])
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [
    ["simulate", "--config", "absent.toml"],
    ["simulate", "--omega", "-1"],
], ids=["missing-file", "negative-omega"])
def test_config_errors_exit_2(in_tmp, argv):
    assert main(argv) == EXIT_CONFIG


@pytest.mark.parametrize("text", ['{"omega": "fast"}', '{"periods": 2.5}'],
                         ids=["string-omega", "fractional-periods"])
def test_mistyped_config_exits_2(write_config, capsys, text):
    path = write_config(text, name="run.json")
    assert main(["simulate", "--config", str(path), "--no-color"]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_options_before_and_after_command():
    args = build_parser().parse_args(["--omega", "0.3", "simulate", "--periods", "4"])
    assert args.omega == 0.3
    assert args.periods == 4
    args = build_parser().parse_args(["simulate"])
    assert not hasattr(args, "omega")


# ── simulate ────────────────────────────────────────────────────────────


def test_simulate_writes_csv(in_tmp):
    out = in_tmp / "run.csv"
    assert main(["simulate", *QUICK, "--out", str(out)]) == EXIT_OK
    meta = _metadata(out)
    assert meta[0].startswith("# periodic-gkls ")
    assert "# seed: 12345" in meta
    config = json.loads(next(m for m in meta if m.startswith("# config: "))[len("# config: "):])
    assert config["protocol"] == "static"
    rows = _rows(out)
    assert rows[0] == ["t", "d", "pop_1", "pop_2", "re_coh_12", "im_coh_12",
                       "re_coh_21", "im_coh_21", "trace_err"]
    assert float(rows[1][0]) == 0.0
    assert len(rows) > 10


def test_simulate_uses_config_file(write_config):
    path = write_config('protocol = "static"\nperiods = 1\nh0 = 2.0\n')
    out = path.parent / "run.csv"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == EXIT_OK
    config = json.loads(next(m for m in _metadata(out) if m.startswith("# config: "))[10:])
    assert config["h0"] == 2.0


# ── scan / expand ───────────────────────────────────────────────────────


def test_scan(in_tmp):
    out = in_tmp / "scan.csv"
    argv = ["scan", *QUICK, "--axis", "h", "--grid", "1.0,2.0", "--out", str(out)]
    assert main(argv) == EXIT_OK
    rows = _rows(out)
    assert rows[0] == ["h", "d_avg", "d_max", "with_cd", "error"]
    assert [float(r[0]) for r in rows[1:]] == [1.0, 2.0]


def test_expand(in_tmp):
    out = in_tmp / "expand.csv"
    assert main(["expand", *QUICK, "--periods", "6", "--order", "0", "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert rows[0][:3] == ["t", "order", "exp_pop_1"]
    assert rows[0][-1] == "diff_norm"
    assert len(rows) > 1


# ── validate ────────────────────────────────────────────────────────────


def test_validate_json(in_tmp, capsys):
    assert main(["validate", "--check", "eigen.reconstruct", "--check", "diss.kms", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert [c["name"] for c in report["checks"]] == ["eigen.reconstruct", "diss.kms"]


@pytest.mark.parametrize("fault,check", [
    ("kms-sign", "diss.stationary"),
    ("gauge-sign", "blocks.cancel"),
    ("delta-sign", "blocks.oracle"),
], ids=["kms", "gauge", "delta"])
def test_validate_injection_exits_1(in_tmp, capsys, fault, check):
    assert main(["validate", "--check", check, "--inject", fault, "--no-color"]) == EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out
