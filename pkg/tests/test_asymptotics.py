import numpy as np
import pytest

from pearson_splitting.asymptotics import (
    InfoMatrices,
    asymptotic_sd,
    delta_transform,
    info_sk,
    info_wf,
    invert_information,
)
from pearson_splitting.errors import InvalidInputError, SingularInformationError
from pearson_splitting.models.kramers import SK_TRUE, SkParams, sk_drift, sk_sigma2
from pearson_splitting.models.wright_fisher import (
    WF_TRUE_NATURAL,
    WfParams,
    wf_drift,
    wf_natural_to_reduced,
)
from pearson_splitting.simulate import SimConfig, simulate_sk_milstein, simulate_wf, subsample

WF_TRUE = wf_natural_to_reduced(WF_TRUE_NATURAL)


def fd_hessian(f, x, eps=1e-4):
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei, ej = np.eye(n)[i] * eps, np.eye(n)[j] * eps
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * eps * eps)
    return H


@pytest.fixture(scope="module")
def wf_states():
    return subsample(simulate_wf(WF_TRUE, SimConfig(1e-3, 2000, seed=0, x0=[0.25, 0.25, 0.25])), 20).states


@pytest.fixture(scope="module")
def sk_states():
    return subsample(simulate_sk_milstein(SK_TRUE, SimConfig(1e-4, 50_000, seed=0, x0=[0.0, 0.0])), 100).states


def test_info_wf_matches_expected_hessian(wf_states):
    # expected Hessian of the per-step Gaussian drift misfit, by finite differences
    X = wf_states
    theta0 = WF_TRUE.to_vector()
    F0 = wf_drift(WF_TRUE, X)
    Sinv = np.linalg.inv(np.stack([np.diag(x) - np.outer(x, x) for x in X]))

    def misfit(theta):
        r = wf_drift(WfParams.from_vector(theta), X) - F0
        return 0.5 * np.einsum("ni,nij,nj->", r, Sinv, r) / X.shape[0]

    np.testing.assert_allclose(info_wf(X), fd_hessian(misfit, theta0), rtol=1e-5, atol=1e-6)


def test_info_wf_mutation_block_has_closed_form(wf_states):
    X = wf_states
    x4 = 1 - X.sum(axis=1)
    expected = np.diag(np.mean(1 / X, axis=0)) + np.mean(1 / x4) * np.ones((3, 3))
    np.testing.assert_allclose(info_wf(X)[:3, :3], expected, rtol=1e-12)


def test_info_sk_matches_expected_hessians(sk_states):
    Z = sk_states
    theta0 = SK_TRUE.to_vector()
    s2_0 = sk_sigma2(SK_TRUE, Z[:, 1])
    mu0 = sk_drift(SK_TRUE, Z)[:, 1]

    def drift_misfit(psi):
        p = SkParams(*psi, *theta0[5:])
        return 0.5 * np.mean((sk_drift(p, Z)[:, 1] - mu0) ** 2 / s2_0)

    def noise_misfit(psi):
        s2 = sk_sigma2(SkParams(*theta0[:5], *psi), Z[:, 1])
        return np.mean(0.5 * np.log(s2) + 0.5 * s2_0 / s2)

    info = info_sk(Z, SK_TRUE)
    np.testing.assert_allclose(info.C1, fd_hessian(drift_misfit, theta0[:5], eps=1e-3), rtol=1e-5)
    np.testing.assert_allclose(info.C2, fd_hessian(noise_misfit, theta0[5:], eps=1e-2), rtol=1e-4, atol=1e-11)


def test_sd_scaling():
    info = InfoMatrices(np.diag([4.0, 1.0]), np.diag([9.0]))
    sd1, sd2 = asymptotic_sd(info, 100, 0.01)
    np.testing.assert_allclose(sd1, [0.5, 1.0])
    np.testing.assert_allclose(sd2, [1 / 30])
    sd1b, sd2b = asymptotic_sd(info, 400, 0.01)
    np.testing.assert_allclose(sd1b, sd1 / 2)
    np.testing.assert_allclose(sd2b, sd2 / 2)
    sd1c, sd2c = asymptotic_sd(info, 100, 0.04)
    np.testing.assert_allclose(sd1c, sd1 / 2)
    np.testing.assert_allclose(sd2c, sd2)
    with pytest.raises(InvalidInputError):
        asymptotic_sd(info, 0, 0.01)


def test_empty_diffusion_block():
    sd = asymptotic_sd(InfoMatrices(np.eye(2), np.zeros((0, 0))), 10, 0.1)
    assert sd.sd2.size == 0 and sd.concatenated().size == 2


def test_invert_information_jitter():
    inv, jitter = invert_information(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert jitter == 0.0
    np.testing.assert_allclose(inv, np.linalg.inv([[2.0, 1.0], [1.0, 2.0]]))
    _, jitter = invert_information(np.ones((2, 2)))
    assert jitter > 0
    with pytest.raises(SingularInformationError):
        invert_information(-np.eye(2))


def test_delta_transform():
    rng = np.random.default_rng(0)
    J = rng.normal(size=(4, 3))
    L = rng.normal(size=(3, 3))
    cov = L @ L.T
    samples = rng.multivariate_normal(np.zeros(3), cov, size=200_000) @ J.T
    np.testing.assert_allclose(delta_transform(J, cov), np.cov(samples.T), rtol=0.05, atol=0.05)
    with pytest.raises(InvalidInputError):
        delta_transform(J, np.eye(4))
