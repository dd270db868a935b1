import numpy as np
import pytest
from scipy.stats import multivariate_normal

from oracles import kramers_generator_moments
from pearson_splitting.errors import InvalidInputError
from pearson_splitting.estimators.core import (
    INDEFINITE,
    ObservationSet,
    gaussian_contributions,
    ll_moments,
)
from pearson_splitting.estimators.kramers import impute_velocity, sk_ga_covariance, sk_ga_mean
from pearson_splitting.estimators.problems import make_objective, param_names, unpack
from pearson_splitting.flows import rk4_flow
from pearson_splitting.models.kramers import SK_TRUE, SkParams, sk_split
from pearson_splitting.models.validation import ou_exact_nll, ou_model
from pearson_splitting.models.wright_fisher import WF_TRUE_NATURAL, wf_natural_to_reduced, wf_split
from pearson_splitting.moments import mean_at, omega_h, precompute_omega_cache
from pearson_splitting.simulate import SimConfig, euler_maruyama, simulate_sk_milstein, simulate_wf, subsample

WF_TRUE = wf_natural_to_reduced(WF_TRUE_NATURAL)


@pytest.fixture(scope="module")
def sk_data():
    path = simulate_sk_milstein(SK_TRUE, SimConfig(1e-4, 200_000, seed=0, x0=[0.0, 0.0]))
    return ObservationSet.from_path(subsample(path, 10))


@pytest.fixture(scope="module")
def wf_data():
    path = simulate_wf(WF_TRUE, SimConfig(1e-3, 4000, seed=1, x0=[0.25, 0.25, 0.25]))
    return ObservationSet.from_path(subsample(path, 10))


@pytest.fixture(scope="module")
def ou_data():
    lam, m, sigma = 1.5, 0.5, 0.8
    cfg = SimConfig(1e-3, 100_000, seed=2, x0=[0.5])
    path = euler_maruyama(lambda x: -lam * (x - m), lambda x: np.array([[sigma]]), cfg)
    return ObservationSet.from_path(subsample(path, 10)), (lam, m, sigma)


def test_gaussian_contributions_match_scipy():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(5, 3, 3))
    Omega = M @ np.swapaxes(M, -1, -2) + 0.1 * np.eye(3)
    Z = rng.normal(size=(5, 3))
    terms, status = gaussian_contributions(Z, Omega)
    assert status == "ok"
    for k in range(5):
        ref = -2 * multivariate_normal(np.zeros(3), Omega[k]).logpdf(Z[k]) - 3 * np.log(2 * np.pi)
        assert terms[k] == pytest.approx(ref, rel=1e-12)


def test_gaussian_contributions_flag_indefinite():
    Omega = np.stack([np.eye(2), -np.eye(2)])
    terms, status = gaussian_contributions(np.ones((2, 2)), Omega)
    assert status == INDEFINITE
    assert np.isfinite(terms[0]) and np.isnan(terms[1])


def test_sk_ga_moments_match_symbolic_expansion():
    mean_x, mean_v, *_ = kramers_generator_moments(2)
    _, _, cov_xx, cov_xv, cov_vv = kramers_generator_moments(3)
    rng = np.random.default_rng(1)
    Z = np.column_stack([rng.uniform(-1.5, 1.5, 8), rng.uniform(-30, 30, 8)])
    for p in (SK_TRUE, SkParams(*(SK_TRUE.to_vector() * rng.uniform(0.5, 1.5, 8)))):
        for h in (0.01, 0.02):
            m = sk_ga_mean(p, Z, h)
            C = sk_ga_covariance(p, Z, h)
            for k, (x, v) in enumerate(Z):
                args = (x, v, h, *p.to_vector())
                np.testing.assert_allclose(m[k], [mean_x(*args), mean_v(*args)], rtol=1e-12)
                np.testing.assert_allclose(C[k], [[cov_xx(*args), cov_xv(*args)],
                                                  [cov_xv(*args), cov_vv(*args)]], rtol=1e-10)


def test_ll_moments_are_exact_for_linear_additive_models():
    A = np.array([[-1.0, 0.4], [-0.3, -2.0]])
    b = np.array([0.5, -0.2])
    S = np.array([[0.5, 0.1], [0.1, 0.3]])
    model = ou_model(-A, b, np.linalg.cholesky(S))
    X0 = np.array([[1.0, 2.0], [-0.5, 0.3]])
    F = model.drift(X0)
    J = np.broadcast_to(A, (2, 2, 2))
    mu, Om = ll_moments(F, J, np.zeros((2, 2, 2, 2)), np.broadcast_to(S, (2, 2, 2)), X0, 0.3)
    for k in range(2):
        np.testing.assert_allclose(mu[k], mean_at(model, X0[k], 0.3), rtol=1e-12)
        np.testing.assert_allclose(Om[k], omega_h(model, X0[k], 0.3), rtol=1e-11)


def test_ss_and_ll_are_exact_on_ou(ou_data):
    data, theta = ou_data
    exact = ou_exact_nll(theta, data.states[:, 0], data.h)
    for est in ("ss", "ll", "exact"):
        assert make_objective("ou", est, data)(theta).value == pytest.approx(exact, rel=1e-10)
    em = make_objective("ou", "em", data)(theta).value
    assert abs(em - exact) > 1e-6 * abs(exact)


def test_ss_objective_matches_transition_by_transition_evaluation(wf_data):
    data = wf_data
    value = make_objective("wf", "ss", data)(WF_TRUE.to_vector())
    model = wf_split(WF_TRUE, data.states.mean(axis=0))
    h = data.h
    total = 0.0
    for x0, x1 in zip(data.previous[:40], data.current[:40]):
        fwd, _ = rk4_flow(model.N, model.DN, x0, h / 2)
        back, Dback = rk4_flow(model.N, model.DN, x1, -h / 2)
        Om = omega_h(model.linear, fwd, h)
        r = back - mean_at(model.linear, fwd, h)
        total += np.linalg.slogdet(Om)[1] + r @ np.linalg.solve(Om, r) - 2 * np.log(abs(np.linalg.det(Dback)))
    assert value.per_transition[:40].sum() == pytest.approx(total, rel=1e-10)


def test_sk_ss_residuals_are_whitened():
    # 100 fine steps per observation; with only 10 the simulator's own
    # position update understates the position variance by about 15%
    path = simulate_sk_milstein(SK_TRUE, SimConfig(1e-4, 500_000, seed=0, x0=[0.0, 0.0]))
    data = ObservationSet.from_path(subsample(path, 100))
    x = data.states[:, 0]
    model = sk_split(SK_TRUE, x.mean(), x.var())
    fwd, _ = model.flow_map(data.previous, data.h / 2)
    back, _ = model.flow_map(data.current, -data.h / 2)
    cache = precompute_omega_cache(model.linear, data.h)
    L = np.linalg.cholesky(cache.omega(fwd))
    W = np.linalg.solve(L, (back - cache.mean(fwd))[..., None])[..., 0]
    assert np.abs(W.mean(axis=0)).max() < 0.1
    np.testing.assert_allclose(np.cov(W.T), np.eye(2), atol=0.06)


def test_sk_objectives_agree_at_small_step(sk_data):
    theta = SK_TRUE.to_vector()
    values = {e: make_objective("sk", e, sk_data)(theta).value / sk_data.n for e in ("ss", "ga", "ll")}
    assert max(values.values()) - min(values.values()) < 0.05


@pytest.mark.parametrize("model,estimator", [("wf", e) for e in ("ss", "em", "ga", "ll")]
                         + [("sk", e) for e in ("ss", "em", "ga", "ll")])
def test_objectives_finite_at_truth(model, estimator, sk_data, wf_data):
    data = sk_data if model == "sk" else wf_data
    theta = SK_TRUE.to_vector() if model == "sk" else WF_TRUE.to_vector()
    out = make_objective(model, estimator, data)(theta)
    assert out.ok and np.isfinite(out.value)
    assert out.per_transition.shape == (data.n,)


def test_invalid_parameters_give_sentinel(ou_data, sk_data):
    data, _ = ou_data
    out = make_objective("ou", "ss", data)((-1.0, 0.0, 1.0))
    assert out.value == np.inf and not out.ok
    bad = SK_TRUE.to_vector().copy()
    bad[5] = -1.0  # alpha < 0 with a negative discriminant
    assert make_objective("sk", "ll", sk_data)(bad).value == np.inf


def test_problem_validation(wf_data):
    with pytest.raises(InvalidInputError):
        make_objective("wf", "bogus", wf_data)
    with pytest.raises(InvalidInputError):
        make_objective("ou", "ss", wf_data)
    edge = ObservationSet(0.1, np.array([[0.2, 0.2, 0.2], [0.0, 0.5, 0.2], [0.3, 0.3, 0.3]]))
    with pytest.raises(InvalidInputError):
        make_objective("wf", "ss", edge)
    with pytest.raises(InvalidInputError):
        param_names("xx")
    assert isinstance(unpack("sk", SK_TRUE.to_vector()), SkParams)


def test_impute_velocity():
    x = np.array([0.0, 0.1, 0.3, 0.6])
    obs = impute_velocity(x, 0.1)
    np.testing.assert_allclose(obs.states, [[0.0, 1.0], [0.1, 2.0], [0.3, 3.0]])
    with pytest.raises(InvalidInputError):
        impute_velocity(x[:3], 0.1)
    with pytest.raises(InvalidInputError):
        impute_velocity(x, 0.0)


def test_observation_set_validation():
    with pytest.raises(InvalidInputError):
        ObservationSet(0.1, np.zeros((2, 1)))
    with pytest.raises(InvalidInputError):
        ObservationSet(0.1, np.array([0.0, np.nan, 1.0]))
