import math

import numpy as np
import pytest

from sigapprox.brownian import BrownianConfig, brownian_values, brownian_increments, extended_increments
from sigapprox.path import terminal_signatures
from sigapprox.sde import (
    NumericalError,
    SdeSpec,
    closed_form_target,
    euler_maruyama,
    gbm_spec,
    ito_to_stratonovich,
    ou_spec,
)
from sigapprox.tensor import shuffle_exp_coefficients, tensor_dim


def driving(K, n, seed=0, d=1, T=1.0):
    cfg = BrownianConfig(d=d, K=K, T=T, seed=seed, n_paths=n)
    return cfg.times, brownian_values(brownian_increments(cfg, range(n)))


def test_gbm_euler_converges_to_closed_form():
    errs = []
    for K in (64, 1024):
        t, w = driving(K, 200)
        em = euler_maruyama(gbm_spec(0.05, 0.2), w, t)
        ex = closed_form_target("gbm", {"mu": 0.05, "sigma": 0.2}, w, t)
        errs.append(np.mean(np.abs(em[:, -1] - ex[:, -1])))
    assert errs[1] < errs[0] / 2 and errs[1] < 1e-3


def test_ou_recursion_matches_euler_limit():
    t, w = driving(2048, 100)
    ex = closed_form_target("ou", {"theta": 1.0, "sigma": 0.3, "y0": 1.0}, w, t)
    em = euler_maruyama(ou_spec(1.0, 0.3, 1.0), w, t)
    assert np.max(np.abs(ex - em)) < 2e-3


def test_ou_deterministic_part():
    t = np.linspace(0, 2, 9)
    ex = closed_form_target("ou", {"theta": 0.7, "sigma": 0.3, "y0": 2.0}, np.zeros((9, 1)), t)
    np.testing.assert_allclose(ex[:, 0], 2.0 * np.exp(-0.7 * t), rtol=1e-13)


def test_stratonovich_correction_gbm():
    spec = gbm_spec(0.05, 0.2)
    y = np.array([[1.0], [2.5]])
    np.testing.assert_allclose(ito_to_stratonovich(spec)(0.0, y), (0.05 - 0.02) * y, rtol=1e-14)


def test_stratonovich_finite_difference_matches_analytic():
    base = gbm_spec(0.1, 0.4)
    fd = SdeSpec(1, 1, base.drift, base.diffusion, base.y0)
    y = np.array([[0.3], [1.7]])
    np.testing.assert_allclose(ito_to_stratonovich(fd)(0.0, y), ito_to_stratonovich(base)(0.0, y), rtol=1e-8)


def test_stratonovich_two_dimensional_state():
    # sigma(y) = [[y2], [y1]] with one noise: correction -1/2 (y1, y2)
    spec = SdeSpec(2, 1, lambda t, y: np.zeros_like(y), lambda t, y: y[..., ::-1, None], np.array([1.0, 0.0]))
    y = np.array([0.4, -1.1])
    np.testing.assert_allclose(ito_to_stratonovich(spec)(0.0, y), -0.5 * y, atol=1e-8)


def test_ou_has_no_correction():
    spec = ou_spec(1.0, 0.3)
    y = np.array([[0.5]])
    np.testing.assert_allclose(ito_to_stratonovich(spec)(0.0, y), spec.drift(0.0, y))


def test_blowup_reports_path():
    t, w = driving(256, 3)
    with pytest.raises(NumericalError, match="path 12"):
        euler_maruyama(gbm_spec(1e6, 0.2), w, t, path_ids=[12, 13, 14])


def test_growth_constant():
    spec = gbm_spec(0.05, 0.2)
    ys = np.linspace(-3, 3, 13)
    assert spec.growth_constant(np.zeros(13), ys) <= 0.25 + 1e-12


def test_dimension_mismatch():
    t, w = driving(8, 1, d=2)
    with pytest.raises(ValueError):
        euler_maruyama(gbm_spec(0.1, 0.1), w, t)


def test_gbm_is_shuffle_exponential_of_signature():
    # <sum_k (a e_0 + s e_1)^{shuffle k}/k!, S> = exp(a T + s W_T) with a = mu - sigma^2/2
    mu, sigma, N = 0.05, 0.2, 8
    cfg = BrownianConfig(d=1, K=128, n_paths=20)
    sigs = terminal_signatures(extended_increments(cfg, range(20)), N)
    ell = shuffle_exp_coefficients([mu - 0.5 * sigma**2, sigma], N).data
    w_T = brownian_values(brownian_increments(cfg, range(20)))[:, -1, 0]
    exact = np.exp((mu - 0.5 * sigma**2) + sigma * w_T)
    assert ell.shape == (tensor_dim(2, N),)
    np.testing.assert_allclose(sigs @ ell, exact, rtol=1e-8)
    # the drift mu alone (without the correction) is off by the Ito term
    naive = sigs @ shuffle_exp_coefficients([mu, sigma], N).data
    assert np.max(np.abs(naive / exact - math.exp(0.5 * sigma**2))) < 1e-8


def test_ou_without_mean_reversion_is_brownian():
    t, w = driving(64, 3)
    ex = closed_form_target("ou", {"theta": 0.0, "sigma": 0.3, "y0": 1.5}, w, t)
    np.testing.assert_allclose(ex[..., 0], 1.5 + 0.3 * w[..., 0], atol=1e-14)


def test_shuffle_exponential_residual_shrinks():
    mu, sigma = 0.05, 0.2
    cfg = BrownianConfig(d=1, K=128, n_paths=50)
    w_T = brownian_values(brownian_increments(cfg, range(50)))[:, -1, 0]
    exact = np.exp(mu - 0.5 * sigma**2 + sigma * w_T)
    res = []
    for N in (2, 4, 6):
        sigs = terminal_signatures(extended_increments(cfg, range(50)), N)
        res.append(np.max(np.abs(sigs @ shuffle_exp_coefficients([mu - 0.5 * sigma**2, sigma], N).data - exact)))
    assert res[0] > res[1] > res[2] and res[2] < 1e-5
