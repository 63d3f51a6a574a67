from typing import List
import logging

import numpy as np

from catenoid_lab.core.equations import (
    cylindrical_acceleration,
    cylindrical_slack,
    cylindrical_terms,
    max_cylindrical_speed,
    rk4_pair,
)
from catenoid_lab.core.exceptions import HyperbolicityLostError, NaNProducedError
from catenoid_lab.core.symbol import cylindrical_coefficients, cylindrical_verdict
from catenoid_lab.models.models import CylState, CylTrajectory, TerminationReason, ZGrid
from catenoid_lab.schemas.schemas import CylConfig, CylRecord

logger = logging.getLogger(__name__)


class CylindricalService:
    def make_state(self, config: CylConfig) -> CylState:
        """
        Gaussian perturbation w = amplitude exp(-z^2 / width^2) of cosh z, zero at the ends.
        """
        grid = ZGrid(z_max=config.z_max, n=config.nz)
        shape = np.exp(-(grid.z / config.width) ** 2)
        shape[[0, -1]] = 0.0
        return CylState(t=0.0, w=config.amplitude * shape, w_t=config.velocity_amplitude * shape, grid=grid)

    def record(self, state: CylState) -> CylRecord:
        terms = cylindrical_terms(state.w, state.w_t, state.grid)
        A, B, C, D, E, _ = cylindrical_coefficients(terms["psi_t"], terms["psi_z"], 0.0)
        return CylRecord(
            t=state.t,
            min_psi=float(np.min(terms["psi"])),
            max_abs_w=float(np.max(np.abs(state.w))),
            max_abs_w_t=float(np.max(np.abs(state.w_t))),
            hyperbolicity_slack=float(np.min(cylindrical_slack(state.w, state.w_t, state.grid))),
            positive_definite=bool(np.all(cylindrical_verdict(A, B, C, D, E))),
        )

    def evolve_cylindrical(self, init: CylState, config: CylConfig) -> CylTrajectory:
        """
        Evolve psi = cosh z + w; a neck below psi_floor ends the run with support_hit_collar.
        """
        grid = init.grid
        t_end = init.t + config.t_end
        if config.exploratory:
            logger.warning("Exploratory cylindrical run: pinch behaviour is reported, not asserted")
        logger.info(f"🚀 Cylindrical evolution: n = {grid.n}, dz = {grid.dz:.4g}, t_end = {t_end:.4g}")

        snapshots: List[CylState] = [init]
        records: List[CylRecord] = [self.record(init)]
        termination = TerminationReason.COMPLETED
        message = None

        if records[0].hyperbolicity_slack < config.hyperbolicity_margin:
            termination, message = TerminationReason.HYPERBOLICITY_LOST, "initial data"
        elif records[0].min_psi <= config.psi_floor:
            termination, message = TerminationReason.SUPPORT_HIT_COLLAR, "initial neck below floor"

        state = init
        steps = 0
        while termination == TerminationReason.COMPLETED and state.t < t_end - 1e-12:
            try:
                speed = max_cylindrical_speed(state.w, state.w_t, grid)
                dt = min(config.cfl_safety * grid.dz / speed, t_end - state.t)
                w, w_t = rk4_pair(
                    np.array(state.w),
                    np.array(state.w_t),
                    state.t,
                    dt,
                    lambda u, v, _t: cylindrical_acceleration(u, v, grid, config.hyperbolicity_margin),
                )
            except HyperbolicityLostError as exc:
                termination, message = TerminationReason.HYPERBOLICITY_LOST, exc.detail
                break
            except NaNProducedError as exc:
                termination, message = TerminationReason.NAN, exc.detail
                break

            w[[0, -1]] = 0.0
            w_t[[0, -1]] = 0.0
            psi_min = float(np.min(np.cosh(grid.z) + w))
            if psi_min <= config.psi_floor:
                termination, message = TerminationReason.SUPPORT_HIT_COLLAR, f"neck pinch proxy: min psi {psi_min:.4g}"
                break

            state = CylState(t=state.t + dt, w=w, w_t=w_t, grid=grid)
            steps += 1
            if steps % config.record_every == 0 or state.t >= t_end - 1e-12:
                snapshots.append(state)
                records.append(self.record(state))

        if state is not snapshots[-1]:
            snapshots.append(state)
            records.append(self.record(state))

        if termination == TerminationReason.COMPLETED:
            logger.info(f"✅ Cylindrical run completed at t = {state.t:.4g}")
        else:
            logger.warning(f"⚠️ Cylindrical run terminated: {termination.value} at t = {state.t:.4g} ({message})")
        return CylTrajectory(snapshots=snapshots, records=records, termination=termination, message=message)


def evolve_cylindrical(init: CylState, config: CylConfig) -> CylTrajectory:
    return CylindricalService().evolve_cylindrical(init, config)
