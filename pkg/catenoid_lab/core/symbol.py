"""
Principal symbol g(X) = |X_hat'|^2 m - X_hat X_hat^T of the vanishing mean curvature
operator, its completed-square decomposition and the cylindrical variant.
"""
from typing import Sequence, Tuple, Union

import numpy as np

from catenoid_lab.core import config as settings
from catenoid_lab.core.exceptions import DegenerateDirectionError, DomainError, NonHyperbolicError
from catenoid_lab.models.models import CylSymbol, SpacetimeVector, Symbol

MINKOWSKI = np.diag([-1.0, 1.0, 1.0, 1.0])


def graph_vector(phi_t: float, phi_x: float, phi_y: float) -> SpacetimeVector:
    """
    Source vector X = (phi_t, -grad phi, 1) of a graph x3 = phi(t, x, y).
    """
    return SpacetimeVector(x0=float(phi_t), x_prime=(-float(phi_x), -float(phi_y), 1.0))


def metric_from_gradient(X: SpacetimeVector) -> Symbol:
    """
    Build g, the shift T = X_hat^0 X_hat' and gamma = (1 - (X_hat^0)^2)(I - X_hat' X_hat'^T).
    """
    norm = X.norm_prime
    if norm == 0.0:
        raise DegenerateDirectionError("Spatial part X' vanishes; X / |X'| is undefined")

    x_hat = X.array / norm
    x0 = x_hat[0]
    xp = x_hat[1:]
    weight = 1.0 - x0 * x0

    g = weight * MINKOWSKI - np.outer(x_hat, x_hat)
    T = x0 * xp
    gamma = weight * (np.eye(3) - np.outer(xp, xp))
    return Symbol(g=g, T=T, gamma=gamma, x_hat=x_hat)


def timelike_slack(phi_t, grad_sq):
    """
    Normalized timelike slack (1 + |grad phi|^2 - phi_t^2) / (1 + |grad phi|^2), elementwise.
    """
    base = 1.0 + np.asarray(grad_sq, dtype=float)
    return (base - np.asarray(phi_t, dtype=float) ** 2) / base


def check_timelike(grad_phi: Sequence[float], margin: float = settings.HYPERBOLICITY_MARGIN) -> Tuple[bool, float]:
    phi_t, phi_x, phi_y = (float(v) for v in grad_phi)
    slack = float(timelike_slack(phi_t, phi_x ** 2 + phi_y ** 2))
    return slack >= margin, slack


def hat_x0_margin(slack: float) -> float:
    """
    1 - |X_hat^0| for a graph gradient, using |X_hat^0|^2 = 1 - slack.
    """
    return 1.0 - float(np.sqrt(max(1.0 - slack, 0.0)))


def gamma_bounds_check(symbol: Symbol, n: Sequence[float]) -> Tuple[float, float, float]:
    """
    Return (lower, gamma(n, n), upper) of the two-sided bound on gamma.
    """
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise DomainError("Direction n must be a unit vector")
    if abs(symbol.hat_x0) >= 1.0:
        raise NonHyperbolicError("Bounds need |X_hat^0| < 1")

    # T = X_hat^0 X_hat' with |X_hat'| = 1, so T / |T| = +-X_hat' and |T| = |X_hat^0|
    axis = symbol.x_hat[1:]
    t_norm = abs(symbol.hat_x0)
    value = float(n @ symbol.gamma @ n)
    t_dot_n = float(symbol.T @ n)

    lower = (1.0 - t_norm ** 2) * (1.0 - float(axis @ n) ** 2)
    upper = (1.0 - abs(t_dot_n)) ** 2
    return lower, value, upper


def cylindrical_coefficients(psi_t, psi_z, p):
    """
    Elementwise A..E, M for the cylindrical symbol with p = psi_theta / r.
    """
    psi_t = np.asarray(psi_t, dtype=float)
    psi_z = np.asarray(psi_z, dtype=float)
    p = np.asarray(p, dtype=float)
    M = 1.0 + psi_z ** 2 + p ** 2
    A = (1.0 + p ** 2 - psi_t ** 2) / M
    B = (1.0 + psi_z ** 2 - psi_t ** 2) / M
    C = psi_t * psi_z / M
    D = psi_t * p / M
    E = p * psi_z / M
    return A, B, C, D, E, M


def cylindrical_verdict(A, B, C, D, E):
    """
    Positive definiteness of the completed-square quadratic form, elementwise.
    """
    first = A + C ** 2
    second = B + D ** 2
    return (first > 0.0) & (second > 0.0) & (first * second > (E - C * D) ** 2)


def cylindrical_symbol(psi_t: float, psi_z: float, psi_theta_over_r: float) -> Tuple[CylSymbol, bool]:
    A, B, C, D, E, M = cylindrical_coefficients(psi_t, psi_z, psi_theta_over_r)
    symbol = CylSymbol(A=float(A), B=float(B), C=float(C), D=float(D), E=float(E), M=float(M))
    return symbol, bool(cylindrical_verdict(A, B, C, D, E))


def characteristic_speeds(symbol: Union[Symbol, CylSymbol], direction: Sequence[float]) -> Tuple[float, float]:
    """
    Propagation speeds along a unit spatial direction, ordered (minus, plus).
    Graph symbols take 2 or 3 components (a 2-vector is padded with xi_3 = 0).
    """
    n = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise DomainError("Direction must be a unit vector")

    if isinstance(symbol, CylSymbol):
        if n.size != 2:
            raise DomainError("Cylindrical direction is (zeta, eta)")
        if not cylindrical_verdict(symbol.A, symbol.B, symbol.C, symbol.D, symbol.E):
            raise NonHyperbolicError("Cylindrical symbol is not positive definite")
        zeta, eta = n
        drift = symbol.C * zeta + symbol.D * eta
        disc = drift ** 2 + symbol.A * zeta ** 2 + symbol.B * eta ** 2 - 2.0 * symbol.E * zeta * eta
        root = float(np.sqrt(max(disc, 0.0)))
        return -drift - root, -drift + root

    if n.size == 2:
        n = np.append(n, 0.0)
    if abs(symbol.hat_x0) >= 1.0:
        raise NonHyperbolicError("Symbol is not hyperbolic: |X_hat^0| >= 1")
    width = float(n @ symbol.gamma @ n)
    if width < 0.0:
        raise NonHyperbolicError("gamma(n, n) is negative")
    shift = float(symbol.T @ n)
    root = float(np.sqrt(width))
    return shift - root, shift + root
