from typing import List, Optional
import logging

import numpy as np

from catenoid_lab.core.equations import radial_slack, stable_dt, step
from catenoid_lab.core.exceptions import HyperbolicityLostError, NaNProducedError
from catenoid_lab.models.models import (
    BackgroundCoeffs,
    ConeRegion,
    RadialState,
    TerminationReason,
    Trajectory,
)
from catenoid_lab.schemas.schemas import DiagnosticsRecord, EvolveConfig
from catenoid_lab.services.diagnostics_service import DiagnosticsService

logger = logging.getLogger(__name__)


class SolverService:
    def __init__(self, diagnostics: Optional[DiagnosticsService] = None):
        self.diagnostics = diagnostics or DiagnosticsService()

    def evolve(self, init: RadialState, bg: BackgroundCoeffs, config: EvolveConfig) -> Trajectory:
        """
        Run the radial evolution to t_end or the first termination condition.
        Numerical failures become termination tags, never exceptions.
        """
        t_end = init.t + config.resolved_t_end()
        threshold = config.support_threshold_rel * init.max_amplitude
        collar_threshold = config.collar_threshold_rel * init.max_amplitude
        cone = ConeRegion(x0=config.cone.x0, R=config.cone.R, t=0.0) if config.cone else None
        collar = bg.grid.r_min + config.collar_buffer

        if config.exploratory:
            logger.warning("Exploratory mode: collar contact is not a termination; inner Dirichlet condition is then physical")

        logger.info(
            f"🚀 Evolving on {bg.kind.value} background: n = {bg.grid.n}, dr = {bg.grid.dr:.4g}, t_end = {t_end:.4g}"
        )

        snapshots: List[RadialState] = [init]
        records: List[DiagnosticsRecord] = []
        flux = 0.0

        slack = radial_slack(init.eps, init.eps_t, bg)
        if float(np.min(slack)) < config.hyperbolicity_margin:
            records.append(self._record(init, bg, config, threshold, flux))
            logger.warning(f"Initial data not hyperbolic: min slack {float(np.min(slack)):.4g}")
            return self._finish(snapshots, records, TerminationReason.HYPERBOLICITY_LOST, bg, "initial data")

        records.append(self._record(init, bg, config, threshold, flux))
        initial_energy = records[0].energy
        flux_rate = self.diagnostics.cone_flux_rate(init, bg, cone) if cone else 0.0

        state = init
        steps = 0
        termination = TerminationReason.COMPLETED
        message = None

        while state.t < t_end - 1e-12:
            try:
                dt = min(stable_dt(state, bg, config.cfl_safety), t_end - state.t)
                new_state = step(state, bg, dt, config.cfl_safety, config.hyperbolicity_margin)
            except HyperbolicityLostError as exc:
                termination, message = TerminationReason.HYPERBOLICITY_LOST, exc.detail
                break
            except NaNProducedError as exc:
                termination, message = TerminationReason.NAN, exc.detail
                break

            if cone is not None:
                new_rate = self.diagnostics.cone_flux_rate(new_state, bg, cone)
                flux += 0.5 * dt * (flux_rate + new_rate)
                flux_rate = new_rate

            state = new_state
            steps += 1
            at_end = state.t >= t_end - 1e-12
            if steps % config.record_every and not at_end:
                continue

            record = self._record(state, bg, config, threshold, flux)
            snapshots.append(state)
            records.append(record)
            logger.debug(f"t = {state.t:.4f}: E = {record.energy:.6e}, slack = {record.hyperbolicity_slack:.4f}")

            if initial_energy > 0.0 and record.energy > config.blowup_factor * initial_energy:
                termination, message = TerminationReason.NORM_BLOWUP, f"energy {record.energy:.3e}"
                break
            if not config.exploratory and self.collar_contact(state, collar, collar_threshold):
                termination, message = TerminationReason.SUPPORT_HIT_COLLAR, f"perturbation reached r = {collar:.4g}"
                break

        if termination in (TerminationReason.HYPERBOLICITY_LOST, TerminationReason.NAN) and state is not snapshots[-1]:
            snapshots.append(state)
            records.append(self._record(state, bg, config, threshold, flux))

        return self._finish(snapshots, records, termination, bg, message)

    def collar_contact(self, state: RadialState, collar: float, threshold: float) -> bool:
        lo, _ = self.diagnostics.support_radius(state, threshold)
        return lo <= collar

    def _record(
        self,
        state: RadialState,
        bg: BackgroundCoeffs,
        config: EvolveConfig,
        threshold: float,
        flux: float,
    ) -> DiagnosticsRecord:
        return self.diagnostics.record(state, bg, config.record_order, threshold, flux_cumulative=flux)

    def _finish(self, snapshots, records, termination, bg, message) -> Trajectory:
        if termination == TerminationReason.COMPLETED:
            logger.info(f"✅ Evolution completed at t = {snapshots[-1].t:.4g} ({len(snapshots)} snapshots)")
        else:
            logger.warning(f"⚠️ Evolution terminated: {termination.value} at t = {snapshots[-1].t:.4g} ({message})")
        return Trajectory(
            snapshots=snapshots,
            records=records,
            termination=termination,
            background=bg.kind,
            message=message,
        )

    def integrate(self, init: RadialState, bg: BackgroundCoeffs, t_end: float, cfl_safety: float, margin: float) -> RadialState:
        """
        Advance with a fixed step t_end / ceil(t_end / dt_cfl), no diagnostics.
        """
        span = t_end - init.t
        if span <= 0.0:
            return init
        count = int(np.ceil(span / stable_dt(init, bg, cfl_safety) * 1.05))
        dt = span / count
        state = init
        for _ in range(count):
            state = step(state, bg, dt, cfl_safety, margin)
        return state


def evolve(init: RadialState, bg: BackgroundCoeffs, config: EvolveConfig) -> Trajectory:
    return SolverService().evolve(init, bg, config)
