"""Split form of a nonlinear SDE: linear Pearson part plus ODE remainder."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..flows import rk4_flow
from ..moments import LinearPearsonModel


@dataclass(frozen=True)
class SplitNonlinearModel:
    """Drift written as ``A (x - b) + N(x)`` around a linear Pearson model.

    ``flow`` is an optional closed-form map ``(x, h) -> (f_h(x), Df_h(x))``.
    When it is ``None`` the flow of ``N`` is approximated by one Runge-Kutta
    step.
    """

    linear: LinearPearsonModel
    N: Callable
    DN: Callable
    flow: Optional[Callable] = None

    @property
    def dim(self):
        return self.linear.dim

    @property
    def uses_rk4(self):
        return self.flow is None

    def drift(self, x):
        return self.linear.drift(x) + self.N(x)

    def drift_jacobian(self, x):
        return self.linear.A + self.DN(x)

    def flow_map(self, x, h):
        if self.flow is not None:
            return self.flow(x, h)
        return rk4_flow(self.N, self.DN, x, h)

    def log_abs_det_flow(self, x, h):
        _, Df = self.flow_map(x, h)
        return np.linalg.slogdet(Df)[1]
