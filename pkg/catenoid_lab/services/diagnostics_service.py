from typing import Callable, Dict, List, Optional, Tuple
import logging

import numpy as np
import sympy
from scipy.integrate import cumulative_trapezoid, trapezoid

from catenoid_lab.core import config as settings
from catenoid_lab.core.equations import assemble_rhs, radial_slack, stable_dt, step
from catenoid_lab.core.exceptions import NonHyperbolicError, UnsupportedOrderError
from catenoid_lab.core.stencils import derivative, first_derivative, second_derivative, time_derivative
from catenoid_lab.models.models import (
    BackgroundCoeffs,
    BackgroundKind,
    ConeRegion,
    GammaField,
    RadialState,
    Trajectory,
)
from catenoid_lab.schemas.schemas import DiagnosticsRecord, EnergyAudit

logger = logging.getLogger(__name__)

DerivativeTable = Dict[Tuple[int, int], np.ndarray]


def japanese_bracket(t: float) -> float:
    return float(np.sqrt(1.0 + t * t))


def _measure(bg: BackgroundCoeffs) -> np.ndarray:
    """
    Radial measure r dr, or dr in planar mode.
    """
    if bg.kind == BackgroundKind.PLANAR:
        return np.ones_like(bg.grid.r)
    return np.asarray(bg.grid.r)


def _integrate(values: np.ndarray, r: np.ndarray, weight: np.ndarray, lo: float = None, hi: float = None) -> float:
    """
    Trapezoid of values * weight over [lo, hi] clipped to the grid; endpoints interpolated.
    """
    lo = r[0] if lo is None else max(lo, r[0])
    hi = r[-1] if hi is None else min(hi, r[-1])
    if hi <= lo:
        return 0.0
    integrand = values * weight
    inside = (r > lo) & (r < hi)
    nodes = np.concatenate(([lo], r[inside], [hi]))
    samples = np.concatenate(
        ([np.interp(lo, r, integrand)], integrand[inside], [np.interp(hi, r, integrand)])
    )
    return float(trapezoid(samples, nodes))


class DiagnosticsService:
    def __init__(self):
        self.delta = settings.DECAY_DELTA
        self.delta1 = settings.DECAY_DELTA1
        self.support_rel = settings.SUPPORT_REL_THRESHOLD
        self.time_step = settings.TIME_STENCIL_STEP
        self.margin = settings.HYPERBOLICITY_MARGIN
        self.cfl_safety = settings.CFL_SAFETY

    # Energy density and identity terms
    def energy_fields(self, state: RadialState, bg: BackgroundCoeffs, eps_tt: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
        """
        Pointwise energy density e, flux F, remainder density S and inhomogeneity G
        with e_t + (1/r)(r F)_r = -2 v G + S.
        """
        dr = bg.grid.dr
        r = bg.grid.r
        eps_r = first_derivative(state.eps, dr)
        eps_rr = second_derivative(state.eps, dr)
        eps_tr = first_derivative(state.eps_t, dr)
        eps_t = np.asarray(state.eps_t)

        p = bg.qr + eps_r
        q = eps_t
        P = 1.0 + p ** 2
        T = -q * p / P
        a = (P - q ** 2) / P ** 2
        b = (P - q ** 2) / P

        v = eps_t + T * eps_r
        e = v ** 2 + a * eps_r ** 2
        fields = {"e": e, "F": T * e - 2.0 * a * eps_r * v, "v": v, "T": T, "a": a, "b": b}
        if eps_tt is None:
            return fields

        # chain rule through (q, p): q_t = eps_tt, q_r = p_t = eps_tr, p_r = Q_rr + eps_rr
        dT_dq = -p / P
        dT_dp = -q * (1.0 - p ** 2) / P ** 2
        da_dq = -2.0 * q / P ** 2
        da_dp = 2.0 * p * (2.0 * q ** 2 - P) / P ** 3
        p_r = bg.qrr + eps_rr
        T_t = dT_dq * eps_tt + dT_dp * eps_tr
        T_r = dT_dq * eps_tr + dT_dp * p_r
        a_t = da_dq * eps_tt + da_dp * eps_tr
        a_r = da_dq * eps_tr + da_dp * p_r

        curv = bg.curvature
        inv_r = curv / r if curv else np.zeros_like(r)
        G = -eps_tt - 2.0 * T * eps_tr + (a - T ** 2) * eps_rr + b * eps_r * inv_r
        S = (
            T_r * e
            + T * e * inv_r
            + 2.0 * v * eps_r * (b * inv_r + T_t + T * T_r - a_r - a * inv_r)
            + eps_r ** 2 * (a_t + T * a_r - 2.0 * a * T_r)
        )
        fields.update({"G": G, "S": S, "T_t": T_t, "T_r": T_r, "a_t": a_t, "a_r": a_r})
        return fields

    def energy(self, state: RadialState, bg: BackgroundCoeffs, region: Optional[ConeRegion] = None) -> float:
        """
        E(t) over a cone section at the state's time, or over the full grid.
        """
        fields = self.energy_fields(state, bg)
        r = bg.grid.r
        if region is None:
            return _integrate(fields["e"], r, _measure(bg))
        interval = region.interval(state.t)
        if interval is None:
            return 0.0
        return _integrate(fields["e"], r, _measure(bg), *interval)

    def energy_audit(self, traj: Trajectory, bg: BackgroundCoeffs, cone: ConeRegion) -> EnergyAudit:
        """
        Terms of E(t) - E(0) + H(t) = R(t) + G(t) on the backward cone, time integrals by trapezoid
        over the recorded snapshots, plus the Gronwall envelope check.
        """
        r = bg.grid.r
        weight = _measure(bg)
        times, energies, flux_rate, remainder_rate, source_rate = [], [], [], [], []
        n_rate, g_norm, a_min = [], [], np.inf

        for state in traj.snapshots:
            interval = cone.interval(state.t)
            if interval is None:
                break
            lo, hi = interval
            f = self.energy_fields(state, bg, assemble_rhs(state, bg, margin=0.0))
            times.append(state.t)
            energies.append(_integrate(f["e"], r, weight, lo, hi))

            e_plus_f = np.interp(hi, r, weight * (f["e"] + f["F"]))
            e_minus_f = np.interp(lo, r, weight * (f["e"] - f["F"]))
            flux_rate.append(float(e_plus_f + e_minus_f))
            remainder_rate.append(_integrate(f["S"], r, weight, lo, hi))
            source_rate.append(_integrate(-2.0 * f["v"] * f["G"], r, weight, lo, hi))

            mask = (r >= lo) & (r <= hi)
            if np.any(mask):
                inv_r = 1.0 / r[mask] if bg.curvature else 0.0
                n_field = (
                    np.abs(f["T_r"]) + np.abs(f["T_t"]) + np.abs(f["a_r"]) + np.abs(f["a_t"])
                )[mask] + (np.abs(f["T"]) + np.abs(f["b"] - f["a"]))[mask] * inv_r
                n_rate.append(float(np.max(n_field)))
                a_min = min(a_min, float(np.min(f["a"][mask])))
            else:
                n_rate.append(0.0)
            g_norm.append(np.sqrt(max(_integrate(f["G"] ** 2, r, weight, lo, hi), 0.0)))

        t = np.array(times)
        E = np.array(energies)
        if t.size == 0:
            return EnergyAudit(times=[], E=[], H=[], R=[], G=[], balance_residual=[], sqrt_energy=[], gronwall_envelope=[], gronwall_holds=True)

        H = cumulative_trapezoid(flux_rate, t, initial=0.0)
        R = cumulative_trapezoid(remainder_rate, t, initial=0.0)
        G = cumulative_trapezoid(source_rate, t, initial=0.0)
        balance = np.abs(E - E[0] + H - R - G)

        c_eps = 3.0 + 1.0 / np.sqrt(a_min) + 2.0 / a_min if np.isfinite(a_min) and a_min > 0 else 0.0
        growth = np.exp(0.5 * c_eps * cumulative_trapezoid(n_rate, t, initial=0.0))
        envelope = growth * (np.sqrt(E[0]) + cumulative_trapezoid(g_norm, t, initial=0.0))
        sqrt_e = np.sqrt(np.clip(E, 0.0, None))
        holds = bool(np.all(sqrt_e <= envelope * (1.0 + 1e-3) + 1e-14))

        logger.info(f"Energy audit over {t.size} snapshots: max balance residual {balance.max():.3e}")
        return EnergyAudit(
            times=t.tolist(),
            E=E.tolist(),
            H=H.tolist(),
            R=R.tolist(),
            G=G.tolist(),
            balance_residual=balance.tolist(),
            sqrt_energy=sqrt_e.tolist(),
            gronwall_envelope=envelope.tolist(),
            gronwall_holds=holds,
        )

    # Commuting vector fields and null forms
    def gamma_apply(self, state: RadialState, which: GammaField) -> np.ndarray:
        eps_r = first_derivative(state.eps, state.grid.dr)
        r = state.grid.r
        if GammaField(which) == GammaField.BOOST:
            return state.t * eps_r + r * state.eps_t
        return state.t * state.eps_t + r * eps_r

    def nullform_residual(
        self,
        state: RadialState,
        partner: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ) -> Tuple[float, float, float]:
        """
        Residuals of the three null-form factorizations with shared discrete derivatives.
        partner is an optional second field (g, g_t); by default g = eps.
        """
        t = state.t
        r = state.grid.r
        dr = state.grid.dr
        eps_t = np.asarray(state.eps_t)
        eps_r = first_derivative(state.eps, dr)
        gamma1 = t * eps_r + r * eps_t
        gamma2 = t * eps_t + r * eps_r

        lhs = eps_r ** 2 - eps_t ** 2
        res1 = np.abs(lhs - (gamma1 + gamma2) * (eps_r - eps_t) / (r + t))

        gap = r ** 2 - t ** 2
        threshold = max(dr, t ** (1.0 - self.delta1)) if t > 0 else dr
        keep = np.abs(gap) >= threshold
        res2 = np.abs(lhs[keep] - (gamma2[keep] ** 2 - gamma1[keep] ** 2) / gap[keep])

        if partner is None:
            g, g_t = state.eps, eps_t
        else:
            g, g_t = (np.asarray(a, dtype=float) for a in partner)
        g_r = first_derivative(g, dr)
        g1 = t * g_r + r * g_t
        g2 = t * g_t + r * g_r
        null_fg = eps_t * g_t - eps_r * g_r
        res3 = np.abs(null_fg[keep] - (gamma2[keep] * g2[keep] - gamma1[keep] * g1[keep]) / (-gap[keep]))

        def _max(values):
            return float(values.max()) if values.size else 0.0

        return _max(res1), _max(res2), _max(res3)

    def log_weighted_ratio(self, state: RadialState, bg: BackgroundCoeffs) -> float:
        """
        sup |(G1 + G2) eps| / (<log r>^(1/2) ||d_r (G1 + G2) eps||_{L2(r dr)}).
        """
        field = self.gamma_apply(state, GammaField.BOOST) + self.gamma_apply(state, GammaField.SCALING)
        r = bg.grid.r
        norm = np.sqrt(_integrate(first_derivative(field, bg.grid.dr) ** 2, r, _measure(bg)))
        if norm == 0.0:
            return 0.0
        bracket = np.sqrt(np.sqrt(1.0 + np.log(r) ** 2))
        return float(np.max(np.abs(field) / bracket) / norm)

    def commutator_residual(
        self,
        field: Callable[[np.ndarray, np.ndarray], np.ndarray],
        which: GammaField,
        dr: float = 0.05,
        dt: Optional[float] = None,
        r_range: Tuple[float, float] = (5.0, 15.0),
        t_range: Tuple[float, float] = (0.5, 1.5),
    ) -> float:
        """
        max |[Gamma, Box] f - claimed| over interior points of a (t, r) sample window,
        Box = d_t^2 - d_r^2 - (1/r) d_r, claimed = -2 Box f (scaling) or Gamma_1 f / r^2 (boost).
        """
        dt = dr if dt is None else dt
        t = t_range[0] + dt * np.arange(int(round((t_range[1] - t_range[0]) / dt)) + 1)
        r = r_range[0] + dr * np.arange(int(round((r_range[1] - r_range[0]) / dr)) + 1)
        tt, rr = np.meshgrid(t, r, indexing="ij")
        f = np.broadcast_to(np.asarray(field(tt, rr), dtype=float), tt.shape)

        def box(u):
            return second_derivative(u, dt, axis=0) - second_derivative(u, dr, axis=1) - first_derivative(u, dr, axis=1) / rr

        def boost(u):
            return tt * first_derivative(u, dr, axis=1) + rr * first_derivative(u, dt, axis=0)

        def scaling(u):
            return tt * first_derivative(u, dt, axis=0) + rr * first_derivative(u, dr, axis=1)

        gamma = boost if GammaField(which) == GammaField.BOOST else scaling
        lhs = gamma(box(f)) - box(gamma(f))
        claimed = boost(f) / rr ** 2 if GammaField(which) == GammaField.BOOST else -2.0 * box(f)
        core = (slice(3, -3), slice(3, -3))
        return float(np.max(np.abs(lhs - claimed)[core]))

    def symbolic_commutator(self, expr: sympy.Expr, which: GammaField) -> sympy.Expr:
        """
        Exact [Gamma, Box] f - claimed for a sympy expression in t and r; simplifies to 0.
        """
        t, r = sympy.symbols("t r", positive=True)

        def box(u):
            return sympy.diff(u, t, 2) - sympy.diff(u, r, 2) - sympy.diff(u, r) / r

        if GammaField(which) == GammaField.BOOST:
            def gamma(u):
                return t * sympy.diff(u, r) + r * sympy.diff(u, t)
            claimed = gamma(expr) / r ** 2
        else:
            def gamma(u):
                return t * sympy.diff(u, t) + r * sympy.diff(u, r)
            claimed = -2 * box(expr)
        return sympy.simplify(gamma(box(expr)) - box(gamma(expr)) - claimed)

    # Derivative tables and bootstrap norms
    def time_derivatives(self, state: RadialState, bg: BackgroundCoeffs, order: int) -> List[np.ndarray]:
        """
        d_t^a eps for a = 0..order. eps_tt comes from the equation; higher orders difference
        the equation's eps_tt along the flow at t + j h, j = -2..2.
        """
        if order > settings.MAX_DERIVATIVE_ORDER:
            raise UnsupportedOrderError(f"Time-derivative order {order} exceeds {settings.MAX_DERIVATIVE_ORDER}")
        derivs = [np.asarray(state.eps), np.asarray(state.eps_t)]
        if order >= 2:
            derivs.append(assemble_rhs(state, bg, margin=0.0))
        if order <= 2:
            return derivs[: order + 1]

        if state.max_amplitude == 0.0:
            derivs.extend(np.zeros_like(derivs[0]) for _ in range(3, order + 1))
            return derivs

        h = self.time_step
        samples = [None, None, derivs[2], None, None]
        for direction in (1.0, -1.0):
            current = state
            for j in (1, 2):
                current = self._advance(current, bg, direction * h)
                samples[2 + int(direction) * j] = assemble_rhs(current, bg, margin=0.0)
        stacked = np.stack(samples)
        for a in range(3, order + 1):
            derivs.append(time_derivative(stacked, h, a - 2))
        return derivs

    def _advance(self, state: RadialState, bg: BackgroundCoeffs, span: float) -> RadialState:
        limit = stable_dt(state, bg, self.cfl_safety)
        count = max(int(np.ceil(abs(span) / limit)), 1)
        dt = span / count
        for _ in range(count):
            state = step(state, bg, dt, self.cfl_safety, margin=0.0)
        return state

    def derivative_table(self, state: RadialState, bg: BackgroundCoeffs, order: int) -> DerivativeTable:
        """
        D[(a, b)] = d_t^a d_r^b eps for a + b <= order.
        """
        if order > settings.MAX_DERIVATIVE_ORDER:
            raise UnsupportedOrderError(f"Order {order} exceeds stencil capability {settings.MAX_DERIVATIVE_ORDER}")
        time_derivs = self.time_derivatives(state, bg, order)
        dr = bg.grid.dr
        return {
            (a, b): derivative(time_derivs[a], dr, b)
            for a in range(order + 1)
            for b in range(order + 1 - a)
        }

    def _boosted(self, table: DerivativeTable, a: int, b: int, t: float, r: np.ndarray) -> List[np.ndarray]:
        """
        d_t^a d_r^b of Gamma_1 eps and Gamma_2 eps by the product rule.
        """
        zero = np.zeros_like(r)

        def D(i, j):
            return table[(i, j)] if i >= 0 and j >= 0 else zero

        boost = t * D(a, b + 1) + a * D(a - 1, b + 1) + r * D(a + 1, b) + b * D(a + 1, b - 1)
        scaling = t * D(a + 1, b) + a * D(a, b) + r * D(a, b + 1) + b * D(a, b)
        return [boost, scaling]

    def norm_profile(self, state: RadialState, bg: BackgroundCoeffs, order: int) -> Dict[str, np.ndarray]:
        """
        Per-order sums: plain[k-1] = sum_{|alpha| = k} ||d^alpha eps||, k = 1..order;
        boosted[k] = sum over Gamma and |alpha| = k of ||d^alpha Gamma eps||, k = 0..order-1;
        sup[k-1] = sum_{|alpha| = k} ||d^alpha eps||_inf, k = 1..order.
        """
        table = self.derivative_table(state, bg, order)
        r = bg.grid.r
        weight = _measure(bg)

        def l2(values):
            return float(np.sqrt(max(_integrate(values ** 2, r, weight), 0.0)))

        plain = np.zeros(order)
        sup = np.zeros(order)
        boosted = np.zeros(order)
        for (a, b), values in table.items():
            k = a + b
            if k >= 1:
                plain[k - 1] += l2(values)
                sup[k - 1] += float(np.max(np.abs(values)))
            if k <= order - 1:
                boosted[k] += sum(l2(field) for field in self._boosted(table, a, b, state.t, r))
        return {"plain": plain, "boosted": boosted, "sup": sup}

    def bootstrap_norms(
        self,
        traj: Trajectory,
        bg: BackgroundCoeffs,
        delta: Optional[float] = None,
        N: int = settings.BOOTSTRAP_ORDER,
    ) -> Tuple[float, float, float]:
        """
        (B1, B2, B3) as sups over the recorded snapshots.
        """
        if N > settings.MAX_DERIVATIVE_ORDER or N < 1:
            raise UnsupportedOrderError(
                f"Bootstrap order N = {N} unsupported; stencils reach {settings.MAX_DERIVATIVE_ORDER}"
            )
        delta = self.delta if delta is None else delta
        sup_order = min(N // 2 + 2, settings.MAX_DERIVATIVE_ORDER)
        order = max(N, sup_order)

        B1 = B2 = B3 = 0.0
        for state in traj.snapshots:
            profile = self.norm_profile(state, bg, order)
            decay = japanese_bracket(state.t) ** (-delta)
            B1 = max(B1, decay * float(profile["plain"][:N].sum()))
            B2 = max(B2, decay * float(profile["boosted"][:N].sum()))
            B3 = max(B3, np.sqrt(japanese_bracket(state.t)) * float(profile["sup"][:sup_order].sum()))
        return B1, B2, B3

    # Support and Sobolev norms
    def support_radius(self, state: RadialState, threshold: float) -> Tuple[float, float]:
        amplitude = np.maximum(np.abs(state.eps), np.abs(state.eps_t))
        above = amplitude > threshold
        if not np.any(above):
            return np.inf, -np.inf
        r = state.grid.r[above]
        return float(r[0]), float(r[-1])

    def sobolev_norm(self, field: np.ndarray, s: int, dx: float) -> float:
        """
        Discrete H^s norm via the FFT of the zero-padded field, s a nonnegative integer.
        """
        if int(s) != s or s < 0:
            raise UnsupportedOrderError(f"Sobolev index must be a nonnegative integer, got {s}")
        values = np.asarray(field, dtype=float)
        size = 1 << int(np.ceil(np.log2(max(values.size, 1))))
        padded = np.zeros(size)
        padded[: values.size] = values
        spectrum = np.fft.fft(padded)
        xi = 2.0 * np.pi * np.fft.fftfreq(size, d=dx)
        total = dx / size * np.sum(np.abs(spectrum) ** 2 * (1.0 + xi ** 2) ** int(s))
        return float(np.sqrt(total))

    # Per-snapshot record
    def record(
        self,
        state: RadialState,
        bg: BackgroundCoeffs,
        order: int,
        support_threshold: float,
        flux_cumulative: float = 0.0,
    ) -> DiagnosticsRecord:
        try:
            profile = self.norm_profile(state, bg, order)
        except NonHyperbolicError:
            # eps_tt is undefined once the slack is non-positive
            partial = self.norm_profile(state, bg, 1)
            profile = {key: np.concatenate((values, np.full(order - 1, np.nan))) for key, values in partial.items()}
        eps_r = first_derivative(state.eps, bg.grid.dr)
        gradient = max(float(np.max(np.abs(eps_r))), float(np.max(np.abs(state.eps_t))))
        return DiagnosticsRecord(
            t=state.t,
            energy=self.energy(state, bg),
            flux_cumulative=flux_cumulative,
            plain_norms=profile["plain"].tolist(),
            boosted_norms=profile["boosted"].tolist(),
            linf_weighted=np.sqrt(japanese_bracket(state.t)) * gradient,
            support=self.support_radius(state, support_threshold),
            hyperbolicity_slack=float(np.min(radial_slack(state.eps, state.eps_t, bg))),
            nullform_residual=max(self.nullform_residual(state)),
        )

    def cone_flux_rate(self, state: RadialState, bg: BackgroundCoeffs, cone: ConeRegion) -> float:
        """
        Instantaneous flux r2 (e + F)(r2) + r1 (e - F)(r1) through the cone mantle.
        """
        interval = cone.interval(state.t)
        if interval is None:
            return 0.0
        lo, hi = interval
        f = self.energy_fields(state, bg)
        r = bg.grid.r
        weight = _measure(bg)
        return float(np.interp(hi, r, weight * (f["e"] + f["F"])) + np.interp(lo, r, weight * (f["e"] - f["F"])))
