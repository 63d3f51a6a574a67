import csv
import json
import os

import pytest
from click.testing import CliRunner

from catenoid_lab import __version__
from catenoid_lab.cli.commands import cli
from main import THREAD_VARIABLES, requested_threads, run


def _rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def _json(path):
    with open(path) as handle:
        return json.load(handle)


@pytest.fixture
def default_config(config_dir):
    return str(config_dir / "default.yaml")


def test_help_lists_commands():
    result = CliRunner().invoke(cli, ["--help"])
    assert result.exit_code == 0
    for name in ("evolve", "evolve-cyl", "picard", "sweep", "audit", "converge"):
        assert name in result.output


def test_version():
    result = CliRunner().invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_unknown_command_is_usage_error():
    assert run(["no-such-command"]) == 2


def test_evolve_zero_data(tmp_path, default_config):
    out = tmp_path / "zero"
    assert run(["evolve", "-c", default_config, "-o", str(out)]) == 0

    rows = _rows(out / "diagnostics.csv")
    assert rows and all(float(row["energy"]) == 0.0 for row in rows)
    manifest = _json(out / "manifest.json")
    assert manifest["termination"] == "completed"
    assert manifest["mode"] == "evolve"
    assert manifest["argv"][0] == "evolve"
    assert manifest["config"]["evolve"]["perturbation"]["lambda"] == 10.0
    assert (out / "checkpoints" / "snapshot_00000.txt").exists()
    assert (out / "plots" / "energy.svg").exists()
    assert _json(out / "summary.json")["termination"] == "completed"
    assert not (out / "error.json").exists()


def test_audit_on_stored_trajectory(tmp_path, default_config):
    stored = tmp_path / "stored"
    assert run(["evolve", "-c", default_config, "-o", str(stored)]) == 0
    out = tmp_path / "audit"
    assert run(["audit", "--trajectory", str(stored), "--set", "audit.samples=1000", "-o", str(out)]) == 0
    report = _json(out / "audit.json")
    assert report["passed"] is True
    assert "nullform_residual" in {check["name"] for check in report["checks"]}


def test_unknown_config_key_exits_with_configuration_error(tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text("evolve:\n  bogus: 1\n")
    out = tmp_path / "bad"
    assert run(["evolve", "-c", str(config), "-o", str(out)]) == 2
    error = _json(out / "error.json")
    assert error["error_code"] == "configuration_error"
    assert error["success"] is False
    manifest = _json(out / "manifest.json")
    assert manifest["config"] == {}
    assert manifest["termination"] is None
    assert manifest["mode"] == "evolve"


def test_malformed_override(tmp_path, default_config):
    assert run(["evolve", "-c", default_config, "-o", str(tmp_path / "x"), "--set", "evolve.dr"]) == 2


def test_non_hyperbolic_data_exit_code(tmp_path, default_config):
    out = tmp_path / "violent"
    code = run(
        [
            "evolve",
            "-c",
            default_config,
            "-o",
            str(out),
            "--set",
            "evolve.perturbation.profile_f=zero",
            "--set",
            "evolve.perturbation.profile_g=bump",
            "--set",
            "evolve.perturbation.amplitude=100",
        ]
    )
    assert code == 3
    assert _json(out / "error.json")["termination"] == "hyperbolicity_lost"
    assert _json(out / "manifest.json")["termination"] == "hyperbolicity_lost"
    assert (out / "diagnostics.csv").exists()


def test_repeated_runs_are_byte_identical(tmp_path, default_config):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert run(["evolve", "-c", default_config, "-o", str(out), "--set", "evolve.perturbation.amplitude=1e-3"]) == 0
        outputs.append(out)
    assert (outputs[0] / "diagnostics.csv").read_bytes() == (outputs[1] / "diagnostics.csv").read_bytes()
    first_checkpoints = sorted((outputs[0] / "checkpoints").iterdir())
    second_checkpoints = sorted((outputs[1] / "checkpoints").iterdir())
    assert [p.name for p in first_checkpoints] == [p.name for p in second_checkpoints]
    assert all(a.read_bytes() == b.read_bytes() for a, b in zip(first_checkpoints, second_checkpoints))


def test_converge_command(tmp_path):
    out = tmp_path / "converge"
    overrides = [
        "convergence.base_dr=0.2",
        "convergence.levels=2",
        "convergence.t_end=1.0",
        "convergence.center=10.0",
        "convergence.r_max=20.0",
    ]
    args = ["converge", "-o", str(out)]
    for item in overrides:
        args += ["--set", item]
    assert run(args) == 0
    rows = _rows(out / "convergence.csv")
    assert len(rows) == 2
    assert rows[0]["order"] == ""
    assert float(rows[1]["error"]) < float(rows[0]["error"])


def test_picard_command(tmp_path):
    out = tmp_path / "picard"
    assert run(["picard", "-o", str(out), "--set", "picard.k_max=3", "--set", "picard.t_end=0.2"]) == 0
    rows = _rows(out / "picard.csv")
    assert [row["k"] for row in rows] == ["1", "2", "3"]
    assert rows[0]["ratio"] == "nan"
    assert _json(out / "picard_summary.json")["limit_vs_evolve"] < 1e-6


def test_evolve_cyl_command(tmp_path):
    out = tmp_path / "cyl"
    assert run(["evolve-cyl", "-o", str(out), "--set", "cylinder.nz=101", "--set", "cylinder.t_end=0.5"]) == 0
    rows = _rows(out / "cylinder.csv")
    assert float(rows[0]["min_psi"]) == 1.0
    assert (out / "plots" / "neck.svg").exists()


def test_sweep_command(tmp_path):
    out = tmp_path / "sweep"
    args = ["sweep", "-o", str(out), "--threads", "1"]
    for item in ("sweep.lambdas=[10.0]", "sweep.kappa0=[1.0e-4]", "sweep.dr=0.1", "sweep.bootstrap_order=2", "sweep.record_every=50"):
        args += ["--set", item]
    assert run(args) == 0
    rows = _rows(out / "sweep.csv")
    assert len(rows) == 1
    assert rows[0]["termination"] == "completed"
    assert _json(out / "sweep_summary.json")["completed"] == 1


@pytest.mark.slow
def test_existence_window_acceptance(tmp_path, config_dir):
    out = tmp_path / "thm31"
    assert run(["sweep", "-c", str(config_dir / "thm31.yaml"), "-o", str(out)]) == 0
    rows = _rows(out / "sweep.csv")
    assert [float(row["lambda"]) for row in rows] == [20.0, 40.0, 80.0]
    assert all(row["termination"] == "completed" for row in rows)
    assert all(float(row["min_slack"]) > 0.9 for row in rows)


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["evolve", "--threads", "4"], 4),
        (["sweep", "--threads=3", "-o", "x"], 3),
        (["evolve", "-c", "a.yaml"], None),
        (["evolve", "--threads", "0"], None),
        (["evolve", "--threads"], None),
    ],
)
def test_requested_threads(argv, expected):
    assert requested_threads(argv) == expected


def test_threads_flag_sets_single_run_thread_limit(tmp_path, default_config, monkeypatch):
    for name in THREAD_VARIABLES:
        monkeypatch.setenv(name, "1")
    out = tmp_path / "threads"
    assert run(["evolve", "-c", default_config, "-o", str(out), "--threads", "2"]) == 0
    assert all(os.environ[name] == "2" for name in THREAD_VARIABLES)
    assert _json(out / "manifest.json")["threads"] == 2
