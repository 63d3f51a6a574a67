"""
Right-hand sides and time stepping for the radial perturbation equation around the
catenoid and for the axially symmetric cylindrical equation around psi = cosh z.
"""
from typing import Callable, Dict, Tuple

import numpy as np

from catenoid_lab.core import config as settings
from catenoid_lab.core.exceptions import CFLViolationError, HyperbolicityLostError, NaNProducedError
from catenoid_lab.core.stencils import first_derivative, second_derivative
from catenoid_lab.models.models import BackgroundCoeffs, RadialState, ZGrid

Acceleration = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


def _require_finite(*arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NaNProducedError("Non-finite values in the evolved fields")


def _require_hyperbolic(slack: np.ndarray, positions: np.ndarray, margin: float) -> None:
    worst = int(np.argmin(slack))
    if slack[worst] < margin:
        raise HyperbolicityLostError(float(slack[worst]), worst, float(positions[worst]), margin)


def radial_slack(eps: np.ndarray, eps_t: np.ndarray, bg: BackgroundCoeffs) -> np.ndarray:
    phi_r = bg.qr + first_derivative(eps, bg.grid.dr)
    base = 1.0 + phi_r ** 2
    return (base - eps_t ** 2) / base


def rhs_groups(
    bg: BackgroundCoeffs,
    eps_r: np.ndarray,
    eps_rr: np.ndarray,
    eps_t: np.ndarray,
    eps_tr: np.ndarray,
) -> Dict[str, np.ndarray]:
    """
    The five bracketed groups of the eps-equation with the eps_tt contribution removed.
    The eps_tt hidden in d/dt of the root is solved for in assemble_rhs.
    """
    phi_r = bg.qr + eps_r
    phi_rr = bg.qrr + eps_rr
    L = 1.0 + phi_r ** 2 - eps_t ** 2
    root = np.sqrt(L)
    base = 1.0 + bg.qr ** 2

    return {
        "null_form_t": eps_t * phi_r * eps_tr / L,
        "null_form_r": root * eps_r * (-(phi_r * phi_rr - eps_t * eps_tr) / (L * root) - bg.c3),
        "second_order": (bg.c2 * (eps_rr + bg.b1 * eps_r) + bg.c1 * (eps_r * eps_rr - eps_t * eps_tr)) / L,
        "lower_order": root * (bg.c3 * eps_r + bg.c4 * (L ** -1.5 - base ** -1.5)),
        "static_background": (root - np.sqrt(base)) * bg.qr * bg.c3,
    }


def radial_acceleration(
    eps: np.ndarray,
    eps_t: np.ndarray,
    bg: BackgroundCoeffs,
    margin: float = settings.HYPERBOLICITY_MARGIN,
) -> np.ndarray:
    dr = bg.grid.dr
    r = bg.grid.r
    _require_finite(eps, eps_t)

    eps_r = first_derivative(eps, dr)
    eps_rr = second_derivative(eps, dr)
    eps_tr = first_derivative(eps_t, dr)

    phi_r = bg.qr + eps_r
    base = 1.0 + phi_r ** 2
    L = base - eps_t ** 2
    _require_hyperbolic(L / base, r, margin)

    laplacian = eps_rr.copy()
    if bg.curvature:
        laplacian += bg.curvature * eps_r / r

    forcing = sum(rhs_groups(bg, eps_r, eps_rr, eps_t, eps_tr).values())
    acc = L * (laplacian + forcing) / base
    acc[0] = 0.0
    acc[-1] = 0.0
    return acc


def assemble_rhs(state: RadialState, bg: BackgroundCoeffs, margin: float = settings.HYPERBOLICITY_MARGIN) -> np.ndarray:
    """
    eps_tt on the grid; zero at the Dirichlet endpoints.
    """
    return radial_acceleration(state.eps, state.eps_t, bg, margin)


def graph_acceleration(state: RadialState, bg: BackgroundCoeffs) -> np.ndarray:
    """
    Compact form (1 + phi_r^2) phi_tt = (1 - phi_t^2) phi_rr + L phi_r / r + 2 phi_t phi_r phi_tr.
    """
    dr = bg.grid.dr
    eps_r = first_derivative(state.eps, dr)
    eps_rr = second_derivative(state.eps, dr)
    eps_tr = first_derivative(state.eps_t, dr)
    eps_t = state.eps_t

    phi_r = bg.qr + eps_r
    base = 1.0 + phi_r ** 2
    L = base - eps_t ** 2
    numerator = (1.0 - eps_t ** 2) * (bg.qrr + eps_rr) + 2.0 * eps_t * phi_r * eps_tr
    if bg.curvature:
        numerator = numerator + bg.curvature * L * phi_r / bg.grid.r
    acc = numerator / base
    acc[0] = 0.0
    acc[-1] = 0.0
    return acc


def max_radial_speed(eps: np.ndarray, eps_t: np.ndarray, bg: BackgroundCoeffs) -> float:
    """
    max |(-phi_t phi_r +- sqrt(L)) / (1 + phi_r^2)| over the grid.
    """
    phi_r = bg.qr + first_derivative(eps, bg.grid.dr)
    base = 1.0 + phi_r ** 2
    L = np.clip(base - eps_t ** 2, 0.0, None)
    return float(np.max((np.abs(eps_t * phi_r) + np.sqrt(L)) / base))


def stable_dt(state: RadialState, bg: BackgroundCoeffs, cfl_safety: float = settings.CFL_SAFETY) -> float:
    return cfl_safety * bg.grid.dr / max_radial_speed(state.eps, state.eps_t, bg)


def rk4_pair(u: np.ndarray, v: np.ndarray, t: float, dt: float, accel: Acceleration) -> Tuple[np.ndarray, np.ndarray]:
    """
    Classical four-stage step for u_t = v, v_t = accel(u, v, t).
    """
    a1 = accel(u, v, t)
    u2, v2 = u + 0.5 * dt * v, v + 0.5 * dt * a1
    a2 = accel(u2, v2, t + 0.5 * dt)
    u3, v3 = u + 0.5 * dt * v2, v + 0.5 * dt * a2
    a3 = accel(u3, v3, t + 0.5 * dt)
    u4, v4 = u + dt * v3, v + dt * a3
    a4 = accel(u4, v4, t + dt)

    u_new = u + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    _require_finite(u_new, v_new)
    return u_new, v_new


def step(
    state: RadialState,
    bg: BackgroundCoeffs,
    dt: float,
    cfl_safety: float = settings.CFL_SAFETY,
    margin: float = settings.HYPERBOLICITY_MARGIN,
) -> RadialState:
    """
    Advance (eps, eps_t) by dt with homogeneous Dirichlet ends.
    A negative dt integrates backwards in time.
    """
    limit = cfl_safety * bg.grid.dr / max_radial_speed(state.eps, state.eps_t, bg)
    if abs(dt) > limit * (1.0 + 1e-12):
        raise CFLViolationError(f"dt = {dt:.6g} exceeds the CFL limit {limit:.6g}")

    eps, eps_t = rk4_pair(
        np.array(state.eps),
        np.array(state.eps_t),
        state.t,
        dt,
        lambda u, v, _t: radial_acceleration(u, v, bg, margin),
    )
    eps[[0, -1]] = 0.0
    eps_t[[0, -1]] = 0.0
    return RadialState(t=state.t + dt, eps=eps, eps_t=eps_t, grid=state.grid)


# Cylindrical equation, theta-independent
def cylindrical_terms(w: np.ndarray, w_t: np.ndarray, grid: ZGrid) -> Dict[str, np.ndarray]:
    z = grid.z
    dz = grid.dz
    c = np.cosh(z)
    s = np.sinh(z)
    w_z = first_derivative(w, dz)
    return {
        "c": c,
        "s": s,
        "psi": c + w,
        "psi_z": s + w_z,
        "psi_t": w_t,
        "w_z": w_z,
        "w_zz": second_derivative(w, dz),
        "w_tz": first_derivative(w_t, dz),
    }


def cylindrical_slack(w: np.ndarray, w_t: np.ndarray, grid: ZGrid) -> np.ndarray:
    terms = cylindrical_terms(w, w_t, grid)
    base = 1.0 + terms["psi_z"] ** 2
    return (base - terms["psi_t"] ** 2) / base


def cylindrical_acceleration(
    w: np.ndarray,
    w_t: np.ndarray,
    grid: ZGrid,
    margin: float = settings.HYPERBOLICITY_MARGIN,
) -> np.ndarray:
    """
    w_tt from (1 + psi_z^2) psi_tt = (1 - psi_t^2) psi_zz + 2 psi_t psi_z psi_tz - L / psi,
    written with cosh z subtracted so that w = 0 is an exact fixed point.
    """
    _require_finite(w, w_t)
    k = cylindrical_terms(w, w_t, grid)
    psi, psi_z, psi_t = k["psi"], k["psi_z"], k["psi_t"]
    base = 1.0 + psi_z ** 2
    L = base - psi_t ** 2
    _require_hyperbolic(L / base, grid.z, margin)

    c, s, w_z = k["c"], k["s"], k["w_z"]
    forcing = (c * w - psi_t ** 2 * (s ** 2 + c * w) - 2.0 * s * w_z - w_z ** 2) / psi
    acc = ((1.0 - psi_t ** 2) * k["w_zz"] + 2.0 * psi_t * psi_z * k["w_tz"] + forcing) / base
    acc[0] = 0.0
    acc[-1] = 0.0
    return acc


def cylindrical_acceleration_direct(w: np.ndarray, w_t: np.ndarray, grid: ZGrid) -> np.ndarray:
    """
    Same equation evaluated on psi directly, without background subtraction.
    """
    k = cylindrical_terms(w, w_t, grid)
    psi, psi_z, psi_t = k["psi"], k["psi_z"], k["psi_t"]
    psi_zz = k["c"] + k["w_zz"]
    base = 1.0 + psi_z ** 2
    L = base - psi_t ** 2
    acc = ((1.0 - psi_t ** 2) * psi_zz + 2.0 * psi_t * psi_z * k["w_tz"] - L / psi) / base
    acc[0] = 0.0
    acc[-1] = 0.0
    return acc


def max_cylindrical_speed(w: np.ndarray, w_t: np.ndarray, grid: ZGrid) -> float:
    k = cylindrical_terms(w, w_t, grid)
    base = 1.0 + k["psi_z"] ** 2
    L = np.clip(base - k["psi_t"] ** 2, 0.0, None)
    return float(np.max((np.abs(k["psi_t"] * k["psi_z"]) + np.sqrt(L)) / base))
