import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from pearson_splitting.errors import FlowFailureError, InvalidInputError
from pearson_splitting.flows import rk4_flow
from pearson_splitting.models.kramers import (
    SK_INIT,
    SK_TRUE,
    SkParams,
    lamperti,
    lamperti_drift,
    lamperti_drift_hessian,
    lamperti_drift_jacobian,
    lamperti_inverse,
    sk_diffusion_spec,
    sk_drift,
    sk_drift_hessian,
    sk_drift_jacobian,
    sk_equilibria,
    sk_force,
    sk_approx_invariant_densities,
    sk_potential,
    sk_sigma2,
    sk_split,
    skew_t_params,
)
from pearson_splitting.models.validation import cir_model, ou_exact_nll, ou_model
from pearson_splitting.models.wright_fisher import (
    NATURAL_NAMES,
    REDUCED_NAMES,
    WF_INIT_NATURAL,
    WF_TRUE_NATURAL,
    WfNaturalParams,
    WfParams,
    check_interior,
    wf_backtransform,
    wf_drift,
    wf_drift_hessian,
    wf_drift_jacobian,
    wf_drift_param_jacobian,
    wf_inverse_diffusion,
    wf_natural_to_reduced,
    wf_reduced_to_natural,
    wf_split,
)
from pearson_splitting.moments import sigma_sigma_t

WF_TRUE = wf_natural_to_reduced(WF_TRUE_NATURAL)


def fd_jacobian(f, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * eps))
    return np.stack(cols, axis=-1)


# Runge-Kutta flow

def test_rk4_flow_matches_accurate_ode_solution():
    def N(x):
        return np.stack([np.sin(x[..., 1]), -x[..., 0] ** 2], axis=-1)

    def DN(x):
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 1] = np.cos(x[..., 1])
        out[..., 1, 0] = -2 * x[..., 0]
        return out

    x0 = np.array([0.3, -0.7])
    h = 0.05
    f, Df = rk4_flow(N, DN, x0, h)
    ref = solve_ivp(lambda t, y: N(y), (0, h), x0, rtol=1e-13, atol=1e-14).y[:, -1]
    np.testing.assert_allclose(f, ref, atol=1e-9)
    np.testing.assert_allclose(Df, fd_jacobian(lambda y: rk4_flow(N, DN, y, h)[0], x0), atol=1e-8)
    # stacked states give the same per-state answer
    fs, Dfs = rk4_flow(N, DN, np.stack([x0, x0]), h)
    np.testing.assert_allclose(fs[1], f)
    np.testing.assert_allclose(Dfs[0], Df)


def test_rk4_flow_failure_is_reported():
    with np.errstate(over="ignore"), pytest.raises(FlowFailureError):
        rk4_flow(lambda x: np.exp(1e3 * x), lambda x: np.zeros(x.shape + x.shape[-1:]), np.array([1.0]), 1.0)


# Wright-Fisher

def test_wf_natural_reduced_roundtrip():
    back = wf_reduced_to_natural(WF_TRUE, WF_TRUE_NATURAL.tau, WF_TRUE_NATURAL.q[3])
    np.testing.assert_allclose(back.P, WF_TRUE_NATURAL.P, atol=1e-14)
    np.testing.assert_allclose(back.q, WF_TRUE_NATURAL.q, atol=1e-13)


def test_wf_reduced_values():
    np.testing.assert_allclose(WF_TRUE.kappa, [0.75, 0.5, 0.5])
    np.testing.assert_allclose(WF_TRUE.lam, [15.0, 30.0, 20.0])
    np.testing.assert_allclose(WF_TRUE.K, [[10.25, 0.25, 0.5], [1.0, 24.75, 2.5], [0.25, 1.25, 15.0]])


def test_wf_drift_matches_four_allele_form():
    # direct form: mutation (tau/2)(P^T x_full - x_full) plus selection x_i (q_i - q.x)
    n = WF_TRUE_NATURAL
    x = np.array([0.1, 0.2, 0.3])
    full = np.append(x, 1 - x.sum())
    mut = 0.5 * n.tau * (n.P.T @ full - full)
    sel = full * (n.q - n.q @ full)
    np.testing.assert_allclose(wf_drift(WF_TRUE, x), (mut + sel)[:3], atol=1e-13)


def test_wf_backtransform_is_affine_and_consistent():
    J, c = wf_backtransform(10.0, 10.0)
    theta = WF_TRUE.to_vector()
    np.testing.assert_allclose(J @ theta + c, WF_TRUE_NATURAL.identifiable_vector(), atol=1e-13)
    assert J.shape == (15, 15)
    assert np.linalg.matrix_rank(J) == 15
    assert len(NATURAL_NAMES) == 15 and len(REDUCED_NAMES) == 15


def test_wf_init_is_valid_and_fields_roundtrip():
    p = wf_natural_to_reduced(WF_INIT_NATURAL)
    assert WfParams.from_fields(p.to_fields()).to_vector() == pytest.approx(p.to_vector())
    assert WfParams.from_vector(p.to_vector()).to_vector() == pytest.approx(p.to_vector())
    with pytest.raises(InvalidInputError):
        WfParams.from_vector(np.zeros(14))
    with pytest.raises(InvalidInputError):
        WfNaturalParams(10.0, np.ones(4), np.ones((4, 4)))


def test_wf_derivatives_match_finite_differences():
    x = np.array([0.2, 0.35, 0.15])
    np.testing.assert_allclose(wf_drift_jacobian(WF_TRUE, x), fd_jacobian(lambda y: wf_drift(WF_TRUE, y), x),
                               atol=1e-7)
    np.testing.assert_allclose(wf_drift_hessian(WF_TRUE, x),
                               fd_jacobian(lambda y: wf_drift_jacobian(WF_TRUE, y), x), atol=1e-6)
    theta = WF_TRUE.to_vector()
    np.testing.assert_allclose(
        wf_drift_param_jacobian(x), fd_jacobian(lambda t: wf_drift(WfParams.from_vector(t), x), theta), atol=1e-7)


def test_wf_inverse_diffusion():
    x = np.array([0.1, 0.5, 0.3])
    S = np.diag(x) - np.outer(x, x)
    np.testing.assert_allclose(wf_inverse_diffusion(x) @ S, np.eye(3), atol=1e-12)


def test_wf_check_interior():
    check_interior(np.array([[0.2, 0.2, 0.2]]))
    with pytest.raises(InvalidInputError):
        check_interior(np.array([[0.5, 0.5, 0.1]]))
    with pytest.raises(InvalidInputError):
        check_interior(np.array([[0.0, 0.5, 0.1]]))


simplex_point = st.tuples(st.floats(0.01, 0.9), st.floats(0.01, 0.9), st.floats(0.01, 0.9)).filter(
    lambda t: sum(t) < 0.99)


@settings(max_examples=50, deadline=None)
@given(simplex_point, simplex_point)
def test_wf_split_reassembles_drift(x, b):
    x, b = np.array(x), np.array(b)
    model = wf_split(WF_TRUE, b)
    np.testing.assert_allclose(model.drift(x), wf_drift(WF_TRUE, x), atol=1e-12)
    np.testing.assert_allclose(model.drift_jacobian(x), wf_drift_jacobian(WF_TRUE, x), atol=1e-12)
    # linear part is the drift Jacobian at the split point
    np.testing.assert_allclose(model.linear.A, wf_drift_jacobian(WF_TRUE, b), atol=1e-12)


def test_wf_remainder_has_zero_mean_jacobian_under_empirical_mean():
    rng = np.random.default_rng(0)
    X = rng.dirichlet(np.ones(4), size=500)[:, :3]
    model = wf_split(WF_TRUE, X.mean(axis=0))
    np.testing.assert_allclose(model.DN(X).mean(axis=0), 0.0, atol=1e-12)


# Kramers oscillator

def test_sk_params_vector_and_fields():
    assert SkParams.from_vector(SK_TRUE.to_vector()) == SK_TRUE
    assert SkParams.from_fields(SK_TRUE.to_fields()) == SK_TRUE
    with pytest.raises(InvalidInputError):
        SkParams.from_vector(np.zeros(7))
    with pytest.raises(InvalidInputError):
        SkParams.from_fields({"sk.eta": 1.0})
    SK_TRUE.check()
    SK_INIT.check()


@pytest.mark.parametrize("change", [{"a": 1.0}, {"alpha": -1.0}, {"alpha": 0.0, "beta": 0.0, "gamma": -1.0},
                                    {"alpha": 70.0}, {"beta": 400.0}])
def test_sk_params_check_rejects(change):
    fields = dict(zip(SkParams.names, SK_TRUE.to_vector()))
    fields.update(change)
    with pytest.raises(InvalidInputError):
        SkParams(**fields).check()


def test_sk_force_is_negative_potential_gradient():
    x = np.linspace(-2, 2, 9)
    dU = fd_jacobian(lambda y: sk_potential(SK_TRUE, y), x).diagonal()
    np.testing.assert_allclose(sk_force(SK_TRUE, x), -dU, rtol=1e-7, atol=1e-6)


def test_sk_derivatives_match_finite_differences():
    z = np.array([0.4, -3.0])
    np.testing.assert_allclose(sk_drift_jacobian(SK_TRUE, z), fd_jacobian(lambda y: sk_drift(SK_TRUE, y), z),
                               atol=1e-6)
    np.testing.assert_allclose(sk_drift_hessian(SK_TRUE, z),
                               fd_jacobian(lambda y: sk_drift_jacobian(SK_TRUE, y), z), atol=1e-5)


def test_sk_diffusion_matrix():
    S = sigma_sigma_t(sk_diffusion_spec(SK_TRUE), np.array([0.3, 2.0]))
    np.testing.assert_allclose(S, [[0.0, 0.0], [0.0, sk_sigma2(SK_TRUE, 2.0)]])


def test_sk_equilibria():
    eq = sk_equilibria(SK_TRUE)
    np.testing.assert_allclose(sk_force(SK_TRUE, eq), 0.0, atol=1e-9)
    np.testing.assert_allclose(eq, [-1.016, 0.1306, 1.2054], atol=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(0.01, 1.0), st.floats(-2, 2), st.floats(-40, 40))
def test_sk_split_reassembles_drift_and_flow_is_exact(mean_x, var_x, x, v):
    model = sk_split(SK_TRUE, mean_x, var_x)
    z = np.array([x, v])
    np.testing.assert_allclose(model.drift(z), sk_drift(SK_TRUE, z), rtol=1e-10, atol=1e-8)
    h = 0.01
    f, Df = model.flow_map(z, h)
    rk, Drk = rk4_flow(model.N, model.DN, z, h)
    # the remainder is constant along its own flow, so Runge-Kutta is exact too
    np.testing.assert_allclose(f, rk, rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(Df, Drk, rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(model.flow_map(f, -h)[0], z, rtol=1e-12, atol=1e-9)


def test_sk_split_slope_is_mean_jacobian():
    rng = np.random.default_rng(1)
    X = rng.normal(0.2, 0.8, size=1000)
    model = sk_split(SK_TRUE, X.mean(), X.var())
    Z = np.column_stack([X, np.zeros_like(X)])
    np.testing.assert_allclose(model.DN(Z).mean(axis=0), 0.0, atol=1e-9)
    # the split point is where the force has that same slope, nearest the mean
    slope = model.linear.A[1, 0]
    bx = model.linear.b[0]
    grid = np.linspace(-3, 3, 600001)
    dF = np.gradient(sk_force(SK_TRUE, grid), grid)
    hits = grid[np.nonzero(np.diff(np.sign(dF - slope)))[0]]
    assert abs(hits - bx).min() < 1e-4
    assert abs(bx - X.mean()) <= abs(hits - X.mean()).min() + 1e-4


def test_skew_t_golden_values():
    nu, mu, nu_sigma2, omega = skew_t_params(67.9, 64.3, 233.2, 4387.8)
    assert nu == pytest.approx(3.11, abs=0.01)
    assert mu == pytest.approx(-1.81, abs=0.01)
    assert nu_sigma2 == pytest.approx(65, abs=1)
    assert omega == pytest.approx(0.475, abs=0.005)
    with pytest.raises(InvalidInputError):
        skew_t_params(10.0, 0.0, 1.0, 1.0)


def test_invariant_densities_normalize():
    pi_x, pi_v = sk_approx_invariant_densities(SK_TRUE)
    assert quad(pi_x, -5, 5, limit=200)[0] == pytest.approx(1.0, abs=1e-8)
    assert quad(pi_v, -200, 200, limit=400)[0] == pytest.approx(1.0, abs=1e-6)
    # the position density peaks at the deeper well
    grid = np.linspace(-2, 2, 4001)
    assert abs(grid[np.argmax(pi_x(grid))] - sk_equilibria(SK_TRUE)[[0, 2]]).min() < 1e-2


def test_invariant_velocity_density_constant_noise_is_gaussian():
    p = SkParams(30.0, -125.0, 0.0, 150.0, 0.0, 0.0, 0.0, 1200.0)
    _, pi_v = sk_approx_invariant_densities(p)
    var = p.gamma / (2 * p.eta)
    v = np.array([-3.0, 0.0, 5.0])
    np.testing.assert_allclose(pi_v(v), np.exp(-v ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var), rtol=1e-7)


def test_lamperti_roundtrip_and_unit_noise():
    v = np.linspace(-30, 30, 13)
    u = lamperti(SK_TRUE, v)
    np.testing.assert_allclose(lamperti_inverse(SK_TRUE, u), v, rtol=1e-12, atol=1e-10)
    dpsi = fd_jacobian(lambda w: lamperti(SK_TRUE, w), v).diagonal()
    np.testing.assert_allclose(dpsi * np.sqrt(sk_sigma2(SK_TRUE, v)), 1.0, rtol=1e-7)


def test_lamperti_drift_matches_ito_formula():
    p = SK_TRUE
    x, v = 0.7, -4.0
    u = lamperti(p, v)
    sigma = np.sqrt(sk_sigma2(p, v))
    dsigma = (2 * p.alpha * v + p.beta) / (2 * sigma)
    expected = (-p.eta * v + sk_force(p, x)) / sigma - 0.5 * dsigma
    f = lamperti_drift(p, np.array([x, u]))
    assert f[1] == pytest.approx(expected, rel=1e-10)
    # position drift is the velocity expressed in the new coordinate
    assert f[0] == pytest.approx(v, rel=1e-10)


def test_lamperti_derivatives_match_finite_differences():
    y = np.array([0.4, 0.3])
    np.testing.assert_allclose(lamperti_drift_jacobian(SK_TRUE, y),
                               fd_jacobian(lambda w: lamperti_drift(SK_TRUE, w), y), rtol=1e-6, atol=1e-5)
    np.testing.assert_allclose(lamperti_drift_hessian(SK_TRUE, y),
                               fd_jacobian(lambda w: lamperti_drift_jacobian(SK_TRUE, w), y), rtol=1e-5, atol=1e-3)


# Validation models

def test_ou_and_cir_validation():
    with pytest.raises(InvalidInputError):
        ou_model(-1.0, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        cir_model(1.0, 0.1, 1.0)
    m = ou_model(np.diag([1.0, 2.0]), [0.0, 1.0], np.eye(2))
    assert m.dim == 2 and m.is_stable()
    assert ou_exact_nll((-1.0, 0.0, 1.0), np.zeros(5), 0.1) == np.inf
