"""
Exact half-line solutions of u_tt - u_rr = 0 by the d'Alembert formula with odd reflection.
"""
from typing import Callable

import numpy as np
from scipy.integrate import simpson

Profile = Callable[[np.ndarray], np.ndarray]


def odd_extension(profile: Profile) -> Profile:
    """
    Extend a profile given on r > 0 to the line by u(-r) = -u(r).
    """
    def extended(x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * profile(np.abs(x))

    return extended


def dalembert_reference(u0: Profile, u1: Profile, t: float, r: np.ndarray, panels: int = 200) -> np.ndarray:
    """
    u(t, r) = (U0(r - t) + U0(r + t)) / 2 + (1/2) integral_{r-t}^{r+t} U1(s) ds
    with U0, U1 the odd extensions; the integral uses composite Simpson (fourth order).
    """
    r = np.asarray(r, dtype=float)
    U0 = odd_extension(u0)
    U1 = odd_extension(u1)

    out = 0.5 * (U0(r - t) + U0(r + t))
    if t == 0.0:
        return out

    nodes = 2 * panels + 1
    s = np.linspace(r - t, r + t, nodes, axis=-1)
    integral = simpson(U1(s), x=s, axis=-1)
    return out + 0.5 * integral
