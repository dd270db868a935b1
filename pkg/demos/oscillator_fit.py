"""Simulate the Student Kramers oscillator and compare estimators on one path.

Run: python3 demos/oscillator_fit.py
"""

from pearson_splitting.asymptotics import asymptotic_sd, info_sk
from pearson_splitting.estimators import ObservationSet
from pearson_splitting.harness import fit_dataset
from pearson_splitting.models.kramers import SK_INIT, SK_TRUE, SkParams
from pearson_splitting.simulate import SimConfig, simulate_sk_milstein, subsample


def main():
    h = 0.01
    fine = simulate_sk_milstein(SK_TRUE, SimConfig(1e-4, 500_000, seed=1, x0=[0.0, 0.0]))
    data = ObservationSet.from_path(subsample(fine, int(round(h / 1e-4))))
    sd = asymptotic_sd(info_sk(data.states, SK_TRUE), data.n, h).concatenated()
    truth = SK_TRUE.to_vector()
    print("param   " + "  ".join(f"{n:>9s}" for n in SkParams.names))
    print("truth   " + "  ".join(f"{v:9.2f}" for v in truth))
    print("sd      " + "  ".join(f"{v:9.2f}" for v in sd))
    fits = {est: fit_dataset("sk", est, data, SK_INIT.to_vector()) for est in ("ss", "em", "ga")}
    for est, fit in fits.items():
        status = "ok" if fit.converged else fit.failure_reason
        print(f"{est:7s} " + "  ".join(f"{v:9.2f}" for v in fit.theta_hat) + f"  [{status}]")
    print("errors in units of the plug-in asymptotic SD:")
    for est, fit in fits.items():
        print(f"{est:7s} " + "  ".join(f"{v:+9.2f}" for v in (fit.theta_hat - truth) / sd))

if __name__ == "__main__":
    main()
