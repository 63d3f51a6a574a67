import numpy as np
import pytest

from catenoid_lab.models.models import BackgroundKind, ProfileName, RadialState, TerminationReason
from catenoid_lab.schemas.schemas import EvolveConfig, PerturbationSpec
from catenoid_lab.services.experiment_service import build_background, make_initial_data
from catenoid_lab.services.solver_service import SolverService, evolve


def _run(config: EvolveConfig):
    bg = build_background(config)
    init, _ = make_initial_data(config.perturbation, bg.grid)
    return evolve(init, bg, config), bg, init


def test_zero_data_stays_zero():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=10.0, amplitude=0.0), dr=0.1, t_end=1.0, record_every=5
    )
    traj, _, _ = _run(config)
    assert traj.termination == TerminationReason.COMPLETED
    assert traj.final.t == pytest.approx(1.0)
    assert np.max(np.abs(traj.final.eps)) == 0.0
    assert all(record.energy == 0.0 for record in traj.records)
    assert traj.records[-1].support == (np.inf, -np.inf)


def test_snapshot_times_and_records():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=10.0, amplitude=1e-3), dr=0.1, t_end=1.0, record_every=3
    )
    traj, _, _ = _run(config)
    times = traj.times
    assert times[0] == 0.0
    assert np.all(np.diff(times) > 0.0)
    assert len(traj.records) == len(traj.snapshots)
    assert [record.t for record in traj.records] == list(times)
    assert len(traj.records[0].plain_norms) == config.record_order


def test_initial_data_outside_hyperbolic_region():
    spec = PerturbationSpec(lam=10.0, amplitude=100.0, profile_f=ProfileName.ZERO, profile_g=ProfileName.BUMP)
    config = EvolveConfig(perturbation=spec, dr=0.1, t_end=1.0)
    traj, _, _ = _run(config)
    assert traj.termination == TerminationReason.HYPERBOLICITY_LOST
    assert len(traj.snapshots) == 1
    assert traj.records[0].hyperbolicity_slack < 0.0
    assert np.isnan(traj.records[0].plain_norms[-1])


def test_energy_nearly_conserved_on_flat_background():
    config = EvolveConfig(
        background=BackgroundKind.FLAT,
        perturbation=PerturbationSpec(lam=10.0, amplitude=1e-3),
        dr=0.05,
        t_end=2.0,
        r_min=1.25,
        record_every=20,
    )
    traj, _, _ = _run(config)
    assert traj.termination == TerminationReason.COMPLETED
    energies = np.array([record.energy for record in traj.records])
    assert np.max(np.abs(energies - energies[0])) / energies[0] < 1e-2


def test_incoming_data_reach_the_collar():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=2.0, amplitude=1e-3), dr=0.05, t_end=3.0, record_every=1
    )
    traj, _, _ = _run(config)
    assert traj.termination == TerminationReason.SUPPORT_HIT_COLLAR
    assert traj.final.t < 1.0
    assert traj.records[-1].support[0] <= 1.25 + config.collar_buffer


def test_exploratory_run_ignores_the_collar():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=2.0, amplitude=1e-3),
        dr=0.05,
        t_end=1.5,
        record_every=10,
        exploratory=True,
    )
    traj, _, _ = _run(config)
    assert traj.termination == TerminationReason.COMPLETED
    assert traj.final.t == pytest.approx(1.5)


def test_interior_stays_quiet_before_the_wave_arrives():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=20.0, amplitude=1e-3), dr=0.05, t_end=2.0, record_every=50
    )
    traj, bg, init = _run(config)
    quiet = bg.grid.r < config.perturbation.lam - traj.final.t - 2.0 * config.dr
    assert np.max(np.abs(traj.final.eps[quiet])) < 1e-10 * np.max(np.abs(init.eps))


def test_collar_contact_ignores_precursor_noise(bump_state):
    solver = SolverService()
    r = bump_state.grid.r
    threshold = 1e-6 * bump_state.max_amplitude
    spike = bump_state.max_amplitude * np.where(np.abs(r - 1.45) < 0.06, 1.0, 0.0)

    faint = RadialState(t=0.0, eps=bump_state.eps + 1e-8 * spike, eps_t=bump_state.eps_t, grid=bump_state.grid)
    strong = RadialState(t=0.0, eps=bump_state.eps + 1e-3 * spike, eps_t=bump_state.eps_t, grid=bump_state.grid)
    assert not solver.collar_contact(faint, 1.75, threshold)
    assert solver.collar_contact(strong, 1.75, threshold)


def test_collar_is_not_reached_before_the_light_cone():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=2.0, amplitude=1e-3), dr=0.05, t_end=3.0, record_every=1
    )
    traj, bg, _ = _run(config)
    collar = bg.grid.r_min + config.collar_buffer
    assert traj.termination == TerminationReason.SUPPORT_HIT_COLLAR
    assert traj.final.t >= config.perturbation.lam - collar - 2.0 * config.dr


def test_integrate_reaches_target_time(bump_state, catenoid_bg):
    solver = SolverService()
    final = solver.integrate(bump_state, catenoid_bg, 0.5, 0.4, 0.05)
    assert final.t == pytest.approx(0.5)
    assert solver.integrate(final, catenoid_bg, 0.25, 0.4, 0.05) is final


@pytest.fixture(scope="module")
def long_quiet_run():
    config = EvolveConfig(
        perturbation=PerturbationSpec(lam=20.0, amplitude=1e-3), dr=0.05, t_end=5.0, record_every=100
    )
    traj, bg, init = _run(config)
    quiet = bg.grid.r < config.perturbation.lam - traj.final.t - 2.0 * config.dr
    return np.max(np.abs(traj.final.eps[quiet])) / np.max(np.abs(init.eps))


@pytest.mark.slow
def test_precursor_stays_below_measured_margin(long_quiet_run):
    # 2.8e-9 measured at lambda = 20, dr = 0.05, t = 5
    assert long_quiet_run < 1e-8


@pytest.mark.slow
@pytest.mark.xfail(reason="second-order stencils leave a ~2.8e-9 precursor 2 dr ahead of the cone by t = 5", strict=False)
def test_interior_quiet_to_round_off(long_quiet_run):
    assert long_quiet_run < 1e-10


@pytest.mark.slow
@pytest.mark.xfail(reason="at the 1e-9 support threshold the precursor puts r_lo = 5.90 below 6.45 by t = 3.6", strict=False)
def test_support_stays_inside_the_cone():
    config = EvolveConfig(
        background=BackgroundKind.FLAT,
        perturbation=PerturbationSpec(lam=10.0, amplitude=1e-3),
        dr=0.1,
        t_end=3.6,
        r_min=1.25,
        record_every=4,
    )
    traj, _, _ = _run(config)
    lo0, hi0 = traj.records[0].support
    for record in traj.records[1:]:
        assert record.support[0] >= lo0 - record.t - 2.0 * config.dr
        assert record.support[1] <= hi0 + record.t + 2.0 * config.dr
