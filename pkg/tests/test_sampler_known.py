import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpmix.core import McmcConfig, validate_dataset
from gpmix.errors import ConfigInvalid
from gpmix.kernels import default_hyperparams
from gpmix.numerics import make_rng, sample_inverse_gamma
from gpmix.sampler_known import (
    AuxMatrices,
    ChainState,
    build_aux,
    draw_g,
    draw_h,
    draw_sigma2,
    g_conditional_moments,
    h_conditional_moments,
    prior_factor,
    run_gibbs_known,
)

from helpers import geweke_known, geweke_z


def test_build_aux_hand_values():
    a = build_aux([1], [0.5], 1.0, [0.0])
    assert (a.d_diag[0], a.lambda_diag[0], a.v_diag[0]) == (4.0, 0.5, 4.0)
    b = build_aux([0], [0.3], 2.0, [1.0])
    assert b.d_diag[0] == pytest.approx(2.0 / 0.49)
    assert b.lambda_diag[0] == -0.3
    assert b.m[0] == -0.3
    assert np.array_equal(build_aux([1, 0], [0.2, 0.7], 3.0, [0.0, 0.0]).m, [0.0, 0.0])


@given(
    st.lists(st.tuples(st.integers(0, 1), st.floats(0.01, 0.99), st.floats(-10, 10)), min_size=1, max_size=20),
    st.floats(1e-3, 1e3),
)
def test_aux_invariants(rows, s2):
    w, e, h = map(np.array, zip(*rows))
    a = build_aux(w, e, s2, h)
    np.testing.assert_array_equal(a.d_diag, s2 * (w / e**2 + (1 - w) / (1 - e) ** 2))
    np.testing.assert_array_equal(a.lambda_diag, np.where(w == 1, 1 - e, -e))
    np.testing.assert_allclose(a.v_diag * s2, a.d_diag, rtol=1e-15)


def _scalar_aux(d, lam, m=0.0):
    return AuxMatrices(d_diag=np.array([d]), lambda_diag=np.array([lam]), v_diag=np.array([d]), m=np.array([m]))


def test_draw_g_scalar_oracle():
    aux = _scalar_aux(1.0, 0.5)
    prior = prior_factor(np.array([[1.0]]), 1e-12)
    rng = make_rng(1)
    d = np.array([draw_g(np.array([2.0]), aux, None, rng, prior=prior)[0] for _ in range(100_000)])
    assert abs(d.mean() - 1.0) < 0.01
    assert abs(d.var() - 0.5) < 0.05 * 0.5


def test_g_moments_flat_prior_and_zero_residual():
    ys = np.array([1.0, -2.0, 0.5])
    aux = build_aux([1, 0, 1], [0.4, 0.6, 0.5], 1.0, [1.0, 2.0, -1.0])
    mean, _ = g_conditional_moments(ys, aux, 1e12 * np.eye(3), jitter=1e-12)
    np.testing.assert_allclose(mean, ys - aux.m, atol=1e-3)
    mean0, _ = g_conditional_moments(aux.m, aux, np.eye(3) + 0.3)
    np.testing.assert_allclose(mean0, 0.0, atol=1e-10)


def test_g_moments_match_precision_form(rng):
    n = 5
    b = rng.standard_normal((n, n))
    k = b @ b.T + n * np.eye(n)
    aux = build_aux(rng.integers(0, 2, n), rng.uniform(0.2, 0.8, n), 0.7, rng.standard_normal(n))
    ys = rng.standard_normal(n)
    mean, cov = g_conditional_moments(ys, aux, k, jitter=1e-14)
    dinv = np.diag(1 / aux.d_diag)
    s = np.linalg.inv(np.linalg.inv(k) + dinv)
    np.testing.assert_allclose(cov, s, atol=1e-10)
    np.testing.assert_allclose(mean, s @ dinv @ (ys - aux.m), atol=1e-10)


def test_h_moments_match_precision_form(rng):
    n = 5
    b = rng.standard_normal((n, n))
    k = b @ b.T + n * np.eye(n)
    aux = build_aux(rng.integers(0, 2, n), rng.uniform(0.2, 0.8, n), 0.7, np.zeros(n))
    ys, g = rng.standard_normal(n), rng.standard_normal(n)
    mean, cov = h_conditional_moments(ys, g, aux, k, jitter=1e-14)
    lam, dinv = np.diag(aux.lambda_diag), np.diag(1 / aux.d_diag)
    s = np.linalg.inv(np.linalg.inv(k) + lam @ dinv @ lam)
    np.testing.assert_allclose(cov, s, atol=1e-10)
    np.testing.assert_allclose(mean, s @ lam @ dinv @ (ys - g), atol=1e-10)


def test_draw_g_multivariate_matches_moments(rng):
    n = 3
    x = rng.standard_normal((n, 1))
    k = 1.0 + 2.0 * x @ x.T  # rank 2 of 3: the singular case pathwise sampling must handle
    aux = build_aux([1, 0, 1], [0.3, 0.5, 0.8], 0.5, [0.2, -0.1, 0.4])
    ys = np.array([1.0, -0.5, 2.0])
    prior = prior_factor(k, 1e-8)
    mean, cov = g_conditional_moments(ys, aux, None, prior=prior)
    r = make_rng(2)
    d = np.array([draw_g(ys, aux, None, r, prior=prior) for _ in range(40_000)])
    se = np.sqrt(np.diag(cov) / len(d))
    assert np.all(np.abs(d.mean(0) - mean) < 4 * se)
    np.testing.assert_allclose(np.cov(d.T), cov, atol=0.03 * np.abs(cov).max())


def test_draw_h_scalar_oracle():
    aux = _scalar_aux(1.0, 0.5)
    prior = prior_factor(np.array([[1.0]]), 1e-12)
    mean, cov = h_conditional_moments(np.array([2.0]), np.array([0.0]), aux, None, prior=prior)
    assert mean[0] == pytest.approx(0.8, abs=1e-9)
    assert cov[0, 0] == pytest.approx(0.8, abs=1e-9)
    rng = make_rng(3)
    d = np.array([draw_h(np.array([2.0]), np.array([0.0]), aux, None, rng, prior=prior)[0] for _ in range(100_000)])
    assert abs(d.mean() - 0.8) < 0.01 * 0.8 + 3 * np.sqrt(0.8 / 1e5)
    assert abs(d.var() - 0.8) < 0.05 * 0.8


def test_h_no_information_limit_and_zero_residual():
    k = np.array([[1.0, 0.3], [0.3, 2.0]])
    aux = AuxMatrices(np.array([1.0, 2.0]), np.zeros(2), np.array([1.0, 2.0]), np.zeros(2))
    mean, cov = h_conditional_moments(np.array([5.0, -3.0]), np.zeros(2), aux, k, jitter=1e-14)
    np.testing.assert_allclose(mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(cov, k, atol=1e-10)
    aux = build_aux([1, 0], [0.3, 0.6], 1.0, [0.0, 0.0])
    ys = np.array([1.5, 2.5])
    mean, _ = h_conditional_moments(ys, ys, aux, k)
    np.testing.assert_allclose(mean, 0.0, atol=1e-10)


def test_sigma2_conditional_parameters():
    aux = build_aux([1], [0.5], 1.0, [0.0])
    got = draw_sigma2(np.array([1.0]), np.array([0.0]), aux, 2.0, 1.0, make_rng(4))
    assert got == sample_inverse_gamma(2.5, 1.125, make_rng(4))
    d = np.array([draw_sigma2(np.array([1.0]), np.array([0.0]), aux, 2.0, 1.0, r) for r in [make_rng(5)] * 200_000])
    assert abs(d.mean() - 0.75) < 0.01 * 0.75


def test_sigma2_scale_behaviour(rng):
    n = 4
    aux = build_aux([1, 0, 1, 0], [0.3, 0.4, 0.6, 0.7], 1.0, rng.standard_normal(n))
    ys = rng.standard_normal(n)
    zero = draw_sigma2(aux.m, np.zeros(n), aux, 2.0, 1.0, make_rng(6))
    assert zero == sample_inverse_gamma(2.0 + n / 2, 1.0, make_rng(6))
    u = np.where([1, 0, 1, 0], [0.3**2, 0, 0.6**2, 0], [0, 0.6**2, 0, 0.3**2])
    r = ys - aux.m
    inc = 0.5 * np.sum(r**2 * u)
    s1 = draw_sigma2(ys, np.zeros(n), aux, 2.0, 1.0, make_rng(7))
    s2 = draw_sigma2(aux.m + 2 * r, np.zeros(n), aux, 2.0, 1.0, make_rng(7))
    assert s1 == pytest.approx(sample_inverse_gamma(2.0 + n / 2, 1.0 + inc, make_rng(7)), rel=1e-12)
    assert s2 == pytest.approx(sample_inverse_gamma(2.0 + n / 2, 1.0 + 4 * inc, make_rng(7)), rel=1e-12)


def test_run_shapes_and_positivity():
    rng = make_rng(0)
    x = rng.standard_normal((3, 1))
    ds = validate_dataset(x, rng.standard_normal(3), [1, 0, 1], [0.5, 0.4, 0.6])
    d = run_gibbs_known(ds, default_hyperparams(x), McmcConfig(10, 0, 1, seed=1))
    assert d.g_draws.shape == (10, 3) and d.h_draws.shape == (10, 3)
    assert d.n_draws == 10 and np.all(d.sigma2_draws > 0)
    assert d.meta["seed"] == 1 and d.meta["n_clipped"] == 0


def test_run_is_deterministic(small_data):
    hp = default_hyperparams(small_data.x)
    cfg = McmcConfig(50, 10, 2, seed=9)
    a, b = run_gibbs_known(small_data, hp, cfg), run_gibbs_known(small_data, hp, cfg)
    assert np.array_equal(a.g_draws, b.g_draws)
    assert np.array_equal(a.h_draws, b.h_draws)
    assert np.array_equal(a.sigma2_draws, b.sigma2_draws)
    assert a.n_draws == 20


def test_run_needs_known_propensity(small_data):
    with pytest.raises(ConfigInvalid):
        run_gibbs_known(small_data.without_propensity(), default_hyperparams(small_data.x), McmcConfig(10, 0))


def test_constant_effect_recovered():
    rng = make_rng(10)
    n = 200
    x = rng.standard_normal((n, 1))
    w = (rng.random(n) < 0.5).astype(int)
    f0 = np.sin(x[:, 0])
    y = f0 + 2.0 * w + 0.1 * rng.standard_normal(n)
    ds = validate_dataset(x, y, w, np.full(n, 0.5))
    d = run_gibbs_known(ds, default_hyperparams(x), McmcConfig(1500, 500, seed=0))
    assert np.mean(np.abs(d.g_draws.mean(0) - 2.0) < 0.3) >= 0.9


def test_chain_state_requires_positive_variance():
    with pytest.raises(ValueError):
        ChainState(np.zeros(1), np.zeros(1), 0.0)


@pytest.mark.slow
def test_getting_it_right_short():
    fw, sc = geweke_known(m=20_000, seed=11)
    assert np.all(np.abs(geweke_z(fw, sc)) < 4)
