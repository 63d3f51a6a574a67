"""
Second-order centered difference operators on uniform grids.
"""
import numpy as np

from catenoid_lab.core.config import MAX_DERIVATIVE_ORDER
from catenoid_lab.core.exceptions import UnsupportedOrderError

# Centered weights for derivative orders 1..4 on the five points j = -2..2
TIME_WEIGHTS = {
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def first_derivative(u: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """
    Centered in the interior, second-order one-sided at the ends.
    """
    return np.gradient(np.asarray(u, dtype=float), h, axis=axis, edge_order=2)


def second_derivative(u: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    u = np.moveaxis(np.asarray(u, dtype=float), axis, -1)
    out = np.empty_like(u)
    out[..., 1:-1] = (u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]) / (h * h)
    if u.shape[-1] >= 4:
        out[..., 0] = (2.0 * u[..., 0] - 5.0 * u[..., 1] + 4.0 * u[..., 2] - u[..., 3]) / (h * h)
        out[..., -1] = (2.0 * u[..., -1] - 5.0 * u[..., -2] + 4.0 * u[..., -3] - u[..., -4]) / (h * h)
    else:
        out[..., 0] = out[..., 1]
        out[..., -1] = out[..., -2]
    return np.moveaxis(out, -1, axis)


def derivative(u: np.ndarray, h: float, order: int) -> np.ndarray:
    """
    Repeated centered stencils: second differences for pairs, one first difference for odd orders.
    """
    if order < 0 or order > MAX_DERIVATIVE_ORDER:
        raise UnsupportedOrderError(
            f"Derivative order {order} outside supported range 0..{MAX_DERIVATIVE_ORDER}"
        )
    out = np.asarray(u, dtype=float)
    if order % 2 == 1:
        out = first_derivative(out, h)
    for _ in range(order // 2):
        out = second_derivative(out, h)
    return out


def time_derivative(samples: np.ndarray, h: float, order: int) -> np.ndarray:
    """
    Apply the five-point centered weights to samples stacked along axis 0 at t + j h.
    """
    if order not in TIME_WEIGHTS:
        raise UnsupportedOrderError(f"Time-stencil order {order} not supported")
    weights = TIME_WEIGHTS[order]
    return np.tensordot(weights, np.asarray(samples, dtype=float), axes=(0, 0)) / h ** order
