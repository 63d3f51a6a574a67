import numpy as np
import pytest

from catenoid_lab.core.exceptions import ConfigurationError, StorageError
from catenoid_lab.models.models import BackgroundKind, RunMode, TerminationReason
from catenoid_lab.schemas.schemas import EvolveConfig, PerturbationSpec
from catenoid_lab.services.experiment_service import build_background, make_initial_data
from catenoid_lab.services.solver_service import evolve
from catenoid_lab.storage.storage import CHECKPOINT_MAGIC, RunRepository, format_float
from catenoid_lab.utils.file_handler import apply_overrides, build_run_config, load_config_file


@pytest.fixture
def short_run():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=10.0, amplitude=1e-3), dr=0.1, t_end=0.5, record_every=4
    )
    bg = build_background(config)
    init, _ = make_initial_data(config.perturbation, bg.grid)
    return evolve(init, bg, config), bg


# Checkpoints
def test_checkpoint_round_trip_is_exact(tmp_path, bump_state):
    repo = RunRepository(tmp_path)
    path = repo.write_checkpoint(bump_state, BackgroundKind.CATENOID, 3)
    assert path.name == "snapshot_00003.txt"
    assert path.read_text().splitlines()[0] == CHECKPOINT_MAGIC

    state, kind = repo.read_checkpoint(path)
    assert kind == BackgroundKind.CATENOID
    assert state.t == bump_state.t
    grid = bump_state.grid
    assert (state.grid.r_min, state.grid.r_max, state.grid.n) == (grid.r_min, grid.r_max, grid.n)
    np.testing.assert_array_equal(state.eps, bump_state.eps)
    np.testing.assert_array_equal(state.eps_t, bump_state.eps_t)


def test_checkpoint_with_unknown_header(tmp_path):
    path = tmp_path / "snapshot_00000.txt"
    path.write_text("# some other format\n0 0\n")
    with pytest.raises(StorageError):
        RunRepository(tmp_path).read_checkpoint(path)


def test_corrupt_checkpoint_body(tmp_path, bump_state):
    repo = RunRepository(tmp_path)
    path = repo.write_checkpoint(bump_state, BackgroundKind.CATENOID, 0)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(StorageError):
        repo.read_checkpoint(path)


def test_missing_checkpoints(tmp_path):
    with pytest.raises(StorageError):
        RunRepository(tmp_path).load_snapshots()


def test_load_trajectory(tmp_path, short_run):
    traj, bg = short_run
    repo = RunRepository(tmp_path)
    repo.write_diagnostics(traj.records)
    for index, state in enumerate(traj.snapshots):
        repo.write_checkpoint(state, bg.kind, index)
    repo.write_json("manifest.json", {"termination": "completed"})

    loaded, loaded_bg = repo.load_trajectory()
    assert loaded.termination == TerminationReason.COMPLETED
    assert loaded_bg.kind == BackgroundKind.CATENOID
    np.testing.assert_array_equal(loaded.times, traj.times)
    np.testing.assert_array_equal(loaded.final.eps, traj.final.eps)
    assert float(loaded.records[-1]["energy"]) == traj.records[-1].energy


# CSV and JSON
def test_diagnostics_csv_is_byte_identical(tmp_path, short_run):
    traj, _ = short_run
    first = RunRepository(tmp_path / "a").write_diagnostics(traj.records)
    second = RunRepository(tmp_path / "b").write_diagnostics(traj.records)
    assert first.read_bytes() == second.read_bytes()
    header = first.read_text().splitlines()[0].split(",")
    assert header[:3] == ["t", "energy", "flux_cumulative"]
    assert header[-1] == "nullform_residual"


def test_csv_float_format(tmp_path):
    repo = RunRepository(tmp_path)
    repo.write_csv("table.csv", ["x", "tag"], [[0.1, "a"], [1.0 / 3.0, "b"]])
    rows = repo.read_csv("table.csv")
    assert rows[0]["x"] == "0.10000000000000001"
    assert float(rows[1]["x"]) == 1.0 / 3.0
    assert format_float(2.5) == "2.5"


def test_malformed_json(tmp_path):
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(StorageError):
        RunRepository(tmp_path).read_json("manifest.json")


# Configuration files
def test_overrides_are_parsed_as_yaml():
    data = apply_overrides({"evolve": {"dr": 0.1}}, ["evolve.dr=0.05", "evolve.perturbation.lambda=20", "evolve.exploratory=true"])
    assert data == {"evolve": {"dr": 0.05, "perturbation": {"lambda": 20}, "exploratory": True}}


def test_override_needs_equals_sign():
    with pytest.raises(ConfigurationError):
        apply_overrides({}, ["evolve.dr"])


def test_build_run_config_layers(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("mode: evolve\nevolve:\n  dr: 0.2\n  perturbation:\n    lambda: 12\n")
    config = build_run_config(str(path), ["evolve.dr=0.1"], output_dir=str(tmp_path / "out"), threads=None)
    assert config.mode == RunMode.EVOLVE
    assert config.evolve.dr == 0.1
    assert config.evolve.perturbation.lam == 12.0
    assert config.output_dir == str(tmp_path / "out")


def test_unknown_config_key(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("evolve:\n  no_such_key: 1\n")
    with pytest.raises(ConfigurationError):
        build_run_config(str(path))


def test_config_file_must_be_a_mapping(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigurationError):
        load_config_file(str(path))
    assert load_config_file(None) == {}
