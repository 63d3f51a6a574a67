from typing import List, Tuple
import logging

import numpy as np
from scipy.integrate import trapezoid

from catenoid_lab.core.equations import rk4_pair, stable_dt
from catenoid_lab.core.exceptions import HyperbolicityLostError
from catenoid_lab.core.stencils import first_derivative, second_derivative
from catenoid_lab.models.models import BackgroundCoeffs, BackgroundKind, RadialState
from catenoid_lab.schemas.schemas import PicardConfig

logger = logging.getLogger(__name__)


class PicardService:
    """
    Iteration phi^k = Q + eps^k where eps^k solves the linear wave equation whose
    coefficients are frozen from (d_r phi^{k-1}, d_t phi^{k-1}), starting from phi^0 = Q.
    """

    def time_levels(self, data: RadialState, bg: BackgroundCoeffs, config: PicardConfig) -> np.ndarray:
        count = int(np.ceil(config.t_end / stable_dt(data, bg, config.cfl_safety) * 1.05))
        return data.t + np.linspace(0.0, config.t_end, count + 1)

    def linear_solve(
        self,
        data: RadialState,
        bg: BackgroundCoeffs,
        times: np.ndarray,
        frozen_p: np.ndarray,
        frozen_q: np.ndarray,
        margin: float,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Solve one linear problem on the fixed time levels; frozen_p and frozen_q hold the
        previous iterate's phi_r and phi_t per level and are interpolated linearly in time.
        """
        r = bg.grid.r
        dr = bg.grid.dr
        dt = times[1] - times[0]
        last = len(times) - 2

        def coefficients(t: float):
            s = (t - times[0]) / dt
            j = min(max(int(np.floor(s)), 0), last)
            theta = s - j
            p = (1.0 - theta) * frozen_p[j] + theta * frozen_p[j + 1]
            q = (1.0 - theta) * frozen_q[j] + theta * frozen_q[j + 1]
            P = 1.0 + p ** 2
            slack = (P - q ** 2) / P
            worst = int(np.argmin(slack))
            if slack[worst] < margin:
                raise HyperbolicityLostError(float(slack[worst]), worst, float(r[worst]), margin)
            return -q * p / P, (P - q ** 2) / P ** 2, (P - q ** 2) / P

        def accel(u, v, t):
            T, a, b = coefficients(t)
            acc = -2.0 * T * first_derivative(v, dr) + (a - T ** 2) * (bg.qrr + second_derivative(u, dr))
            if bg.curvature:
                acc = acc + bg.curvature * b * (bg.qr + first_derivative(u, dr)) / r
            acc[0] = 0.0
            acc[-1] = 0.0
            return acc

        eps = np.empty((len(times), bg.grid.n))
        eps_t = np.empty_like(eps)
        eps[0], eps_t[0] = data.eps, data.eps_t
        for j in range(len(times) - 1):
            u, v = rk4_pair(eps[j].copy(), eps_t[j].copy(), times[j], dt, accel)
            u[[0, -1]] = 0.0
            v[[0, -1]] = 0.0
            eps[j + 1], eps_t[j + 1] = u, v
        return eps, eps_t

    def energy_difference(self, bg: BackgroundCoeffs, d_eps: np.ndarray, d_eps_t: np.ndarray) -> float:
        r = bg.grid.r
        weight = np.ones_like(r) if bg.kind == BackgroundKind.PLANAR else r
        d_eps_r = first_derivative(d_eps, bg.grid.dr)
        return float(np.sqrt(trapezoid((d_eps_t ** 2 + d_eps_r ** 2) * weight, r)))

    def picard_iterate(
        self, data: RadialState, bg: BackgroundCoeffs, config: PicardConfig
    ) -> Tuple[List[RadialState], List[float]]:
        """
        Returns the iterates eps^1..eps^k_max at t = T and deltas[k-1] = ||d(phi^k - phi^{k-1})||
        in L^2(r dr) at t = T.
        """
        times = self.time_levels(data, bg, config)
        logger.info(
            f"🚀 Picard iteration on {bg.kind.value} background: k_max = {config.k_max}, "
            f"T = {config.t_end:.4g}, {len(times) - 1} time steps"
        )

        zeros = np.zeros((len(times), bg.grid.n))
        prev_eps, prev_eps_t = zeros, zeros
        iterates: List[RadialState] = []
        deltas: List[float] = []

        for k in range(1, config.k_max + 1):
            frozen_p = bg.qr + first_derivative(prev_eps, bg.grid.dr, axis=-1)
            eps, eps_t = self.linear_solve(data, bg, times, frozen_p, prev_eps_t, config.hyperbolicity_margin)
            delta = self.energy_difference(bg, eps[-1] - prev_eps[-1], eps_t[-1] - prev_eps_t[-1])
            deltas.append(delta)
            iterates.append(RadialState(t=float(times[-1]), eps=eps[-1], eps_t=eps_t[-1], grid=bg.grid))
            logger.debug(f"Picard k = {k}: delta = {delta:.6e}")
            prev_eps, prev_eps_t = eps, eps_t

        logger.info(f"✅ Picard iteration finished: last delta = {deltas[-1]:.3e}")
        return iterates, deltas


def picard_iterate(
    data: RadialState, bg: BackgroundCoeffs, config: PicardConfig
) -> Tuple[List[RadialState], List[float]]:
    return PicardService().picard_iterate(data, bg, config)
