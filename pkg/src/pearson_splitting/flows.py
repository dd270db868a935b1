"""Deterministic flows of the nonlinear drift remainder."""

import numpy as np

from .errors import FlowFailureError

__all__ = ["rk4_flow"]


def rk4_flow(N, DN, x, h):
    """One classical Runge-Kutta step for ``dx/dt = N(x)`` and its Jacobian.

    ``x`` may be a single state ``(d,)`` or a stack ``(n, d)``; ``N`` and
    ``DN`` must accept the same shapes. A negative ``h`` gives the backward
    step, which serves as the approximate inverse flow.

    Returns ``(f_h(x), Df_h(x))``.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    eye = np.eye(d)
    half = 0.5 * h

    k1 = N(x)
    J1 = DN(x)
    y2 = x + half * k1
    k2 = N(y2)
    J2 = DN(y2) @ (eye + half * J1)
    y3 = x + half * k2
    k3 = N(y3)
    J3 = DN(y3) @ (eye + half * J2)
    y4 = x + h * k3
    k4 = N(y4)
    J4 = DN(y4) @ (eye + h * J3)

    f = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    Df = eye + (h / 6.0) * (J1 + 2.0 * J2 + 2.0 * J3 + J4)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(Df))):
        raise FlowFailureError("non-finite value in Runge-Kutta flow")
    return f, Df
