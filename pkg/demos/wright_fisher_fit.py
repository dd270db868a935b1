"""Fit the reduced Wright-Fisher model with splitting and Euler on one path.

At T = 20 the plug-in asymptotic SDs are large, so errors are reported in
SD units as well.

Run: python3 demos/wright_fisher_fit.py
"""

import numpy as np

from pearson_splitting.asymptotics import InfoMatrices, asymptotic_sd, info_wf
from pearson_splitting.estimators import ObservationSet
from pearson_splitting.harness import fit_dataset
from pearson_splitting.models.wright_fisher import (
    WF_INIT_NATURAL,
    WF_TRUE_NATURAL,
    wf_natural_to_reduced,
)
from pearson_splitting.optimize import OptSchedule
from pearson_splitting.simulate import SimConfig, simulate_wf, subsample


def main():
    h = 0.02
    truth = wf_natural_to_reduced(WF_TRUE_NATURAL).to_vector()
    fine = simulate_wf(wf_natural_to_reduced(WF_TRUE_NATURAL), SimConfig(1e-4, 200_000, seed=2, x0=[0.25] * 3))
    data = ObservationSet.from_path(subsample(fine, int(round(h / 1e-4))))
    sd = asymptotic_sd(InfoMatrices(info_wf(data.states), np.zeros((0, 0))), data.n, h).concatenated()
    init = wf_natural_to_reduced(WF_INIT_NATURAL).to_vector()
    print("truth  ", " ".join(f"{v:7.2f}" for v in truth))
    print("sd     ", " ".join(f"{v:7.2f}" for v in sd))
    for est in ("ss", "em"):
        fit = fit_dataset("wf", est, data, init, OptSchedule.adam_then_bfgs(max_iter=100))
        print(f"{est} z  ", " ".join(f"{v:+7.2f}" for v in (fit.theta_hat - truth) / sd),
              "" if fit.converged else fit.failure_reason)


if __name__ == "__main__":
    main()
