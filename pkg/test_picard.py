import numpy as np
import pytest

from catenoid_lab.core.exceptions import HyperbolicityLostError
from catenoid_lab.core.geometry import background_coeffs
from catenoid_lab.models.models import BackgroundKind, RadialGrid, RadialState
from catenoid_lab.schemas.schemas import PerturbationSpec, PicardConfig
from catenoid_lab.services.experiment_service import make_initial_data
from catenoid_lab.services.picard_service import PicardService, picard_iterate
from catenoid_lab.services.solver_service import SolverService


@pytest.fixture
def flat_small():
    return background_coeffs(RadialGrid.from_spacing(1.25, 12.0, 0.05), BackgroundKind.FLAT)


@pytest.fixture
def picard_data(flat_small):
    spec = PerturbationSpec(lam=5.0, amplitude=1e-3)
    data, _ = make_initial_data(spec, flat_small.grid)
    return data


def test_zero_data_gives_zero_iterates(flat_small):
    config = PicardConfig(k_max=3, t_end=0.3)
    iterates, deltas = picard_iterate(RadialState.zeros(flat_small.grid), flat_small, config)
    assert deltas == [0.0, 0.0, 0.0]
    assert all(np.max(np.abs(state.eps)) == 0.0 for state in iterates)


def test_iterates_contract(picard_data, flat_small):
    config = PicardConfig(k_max=6, t_end=0.5)
    iterates, deltas = picard_iterate(picard_data, flat_small, config)
    assert len(iterates) == len(deltas) == 6
    assert iterates[-1].t == pytest.approx(0.5)
    assert deltas[0] > 0.0
    for previous, current in zip(deltas, deltas[1:]):
        if previous < 1e-13:
            break
        assert current <= 0.5 * previous


def test_limit_matches_nonlinear_evolution(picard_data, flat_small):
    config = PicardConfig(k_max=8, t_end=0.5)
    iterates, _ = PicardService().picard_iterate(picard_data, flat_small, config)
    direct = SolverService().integrate(
        picard_data, flat_small, picard_data.t + config.t_end, config.cfl_safety, config.hyperbolicity_margin
    )
    np.testing.assert_allclose(iterates[-1].eps, direct.eps, atol=1e-9)
    np.testing.assert_allclose(iterates[-1].eps_t, direct.eps_t, atol=1e-9)


def test_time_levels_follow_the_cfl_step(picard_data, flat_small):
    config = PicardConfig(t_end=0.5)
    times = PicardService().time_levels(picard_data, flat_small, config)
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(0.5)
    assert np.allclose(np.diff(times), times[1] - times[0])


def test_frozen_coefficients_lose_hyperbolicity(flat_small):
    r = flat_small.grid.r
    eps_t = 1.5 * np.exp(-((r - 6.0) ** 2))
    eps_t[[0, -1]] = 0.0
    data = RadialState(t=0.0, eps=np.zeros_like(r), eps_t=eps_t, grid=flat_small.grid)
    with pytest.raises(HyperbolicityLostError):
        picard_iterate(data, flat_small, PicardConfig(k_max=3, t_end=0.2))
