from pathlib import Path

import numpy as np
import pytest

from catenoid_lab.core.geometry import background_coeffs
from catenoid_lab.models.models import BackgroundKind, ProfileName, RadialGrid, RadialState
from catenoid_lab.schemas.schemas import PerturbationSpec
from catenoid_lab.services.experiment_service import make_initial_data

REPO_ROOT = Path(__file__).parent


@pytest.fixture
def config_dir():
    return REPO_ROOT / "config"


@pytest.fixture
def catenoid_bg():
    return background_coeffs(RadialGrid.from_spacing(1.25, 23.25, 0.1), BackgroundKind.CATENOID)


@pytest.fixture
def flat_bg():
    return background_coeffs(RadialGrid.from_spacing(1.25, 23.25, 0.1), BackgroundKind.FLAT)


@pytest.fixture
def bump_spec():
    return PerturbationSpec(lam=10.0, amplitude=1e-3, profile_f=ProfileName.BUMP, profile_g=ProfileName.ZERO)


@pytest.fixture
def bump_state(catenoid_bg, bump_spec):
    state, _ = make_initial_data(bump_spec, catenoid_bg.grid)
    return state


@pytest.fixture
def smooth_state(catenoid_bg):
    """Small smooth fields at t = 2, away from the light cone r = t."""
    r = catenoid_bg.grid.r
    eps = 1e-3 * np.sin(0.7 * r) * np.exp(-((r - 12.0) ** 2) / 20.0)
    eps_t = 5e-4 * np.cos(0.3 * r) * np.exp(-((r - 10.0) ** 2) / 30.0)
    return RadialState(t=2.0, eps=eps, eps_t=eps_t, grid=catenoid_bg.grid)
