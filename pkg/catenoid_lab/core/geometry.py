"""
Closed-form catenoid profile Q(r) = log(r + sqrt(r^2 - 1)) and the exact coefficient
functions of the perturbation equation for phi = Q + eps.
"""
from typing import Dict

import numpy as np

from catenoid_lab.core.exceptions import DomainError
from catenoid_lab.models.models import BackgroundCoeffs, BackgroundKind, CatenoidPoint, RadialGrid


def catenoid_profile(r: float) -> CatenoidPoint:
    """
    Height and derivatives of the upper catenoid sheet at radius r >= 1.
    At the collar r = 1 the derivatives are unbounded and flagged as such.
    """
    r = float(r)
    if not np.isfinite(r) or r < 1.0:
        raise DomainError(f"Catenoid profile is defined for r >= 1, got r = {r}")

    if r == 1.0:
        return CatenoidPoint(r=r, Q=0.0, Q_r=np.inf, Q_rr=-np.inf, derivative_unbounded=True)

    s = np.sqrt(r * r - 1.0)
    return CatenoidPoint(
        r=r,
        Q=float(np.log(r + s)),
        Q_r=float(1.0 / s),
        Q_rr=float(-r / s ** 3),
    )


def _catenoid_arrays(r: np.ndarray) -> Dict[str, np.ndarray]:
    s2 = r * r - 1.0
    s = np.sqrt(s2)
    qr = 1.0 / s
    qrr = -r / (s2 * s)
    return {
        "q": np.log(r + s),
        "qr": qr,
        "qrr": qrr,
        "c1": -qr,
        "c2": -1.0 / s2,
        "b1": -r / s2,
        "c3": 1.0 / (r * r * s),
        "c4": r / (s2 * s2 * s),
        "sqrt_factor": s / r,
    }


def background_coeffs(grid: RadialGrid, kind: BackgroundKind = BackgroundKind.CATENOID) -> BackgroundCoeffs:
    """
    Exact background coefficients on the grid.

    c1 = -Q_r, c2 = -Q_r^2, b1 = Q_rr / Q_r multiply the second-order error terms,
    c3 = d/dr (1/sqrt(1 + Q_r^2)) and c4 = -Q_r^2 Q_rr the lower-order ones.
    Flat and planar backgrounds have Q = 0; planar drops the 1/r term of the Laplacian.
    """
    kind = BackgroundKind(kind)
    r = grid.r

    if kind == BackgroundKind.CATENOID:
        if grid.r_min <= 1.0:
            raise DomainError(f"Catenoid background needs r_min > 1, got r_min = {grid.r_min}")
        arrays = _catenoid_arrays(r)
        curvature = 1.0
    else:
        if kind == BackgroundKind.FLAT and grid.r_min <= 0.0:
            raise DomainError("Radial flat background needs r_min > 0")
        zeros = np.zeros_like(r)
        arrays = {name: zeros for name in ("q", "qr", "qrr", "c1", "c2", "b1", "c3", "c4")}
        arrays["sqrt_factor"] = np.ones_like(r)
        curvature = 1.0 if kind == BackgroundKind.FLAT else 0.0

    return BackgroundCoeffs(grid=grid, kind=kind, curvature=curvature, **arrays)


def envelope_constants(bg: BackgroundCoeffs) -> Dict[str, float]:
    """
    Measured symbol-type constants max r^3 |c3| and max r^4 |c4| on the grid.
    """
    r = bg.grid.r
    return {
        "c3_r3": float(np.max(np.abs(bg.c3) * r ** 3)),
        "c4_r4": float(np.max(np.abs(bg.c4) * r ** 4)),
    }
