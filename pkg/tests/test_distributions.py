import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from tmml.distributions import (TSpec, _js_std, build_dof_grid, format_nu, js_divergence, kl_divergence,
                                neg_log_likelihood, parse_grid, parse_nu, sample_t, t_logpdf)


@pytest.mark.parametrize("nu", [1.0, 1.9, 5.0, 50.0, math.inf])
def test_density_integrates_to_one(nu):
    f = lambda x: math.exp(float(t_logpdf(x, 0.3, 2.0, nu)))
    total = integrate.quad(f, -np.inf, 0.3)[0] + integrate.quad(f, 0.3, np.inf)[0]
    assert abs(total - 1.0) < 1e-6


def test_logpdf_matches_scipy():
    assert float(t_logpdf(1.0, 0.0, 1.0, 5.0)) == pytest.approx(stats.t.logpdf(1.0, 5), rel=1e-13)
    y = np.linspace(-7, 9, 41)
    np.testing.assert_allclose(t_logpdf(y, 1.0, 4.0, 1.9), stats.t.logpdf(y, 1.9, loc=1.0, scale=2.0), rtol=1e-12)
    np.testing.assert_allclose(t_logpdf(y, 1.0, 4.0, math.inf), stats.norm.logpdf(y, 1.0, 2.0), rtol=1e-12)


def test_large_nu_approaches_gaussian():
    y = np.linspace(-6, 6, 101)
    np.testing.assert_allclose(t_logpdf(y, 0, 1, 1e8), t_logpdf(y, 0, 1, math.inf), atol=1e-5)


@given(st.floats(-50, 50), st.floats(-5, 5), st.floats(0.01, 100), st.sampled_from([1.0, 1.9, 5.0, math.inf]))
def test_logpdf_location_scale(y, mu, tau, nu):
    # f(y; mu, tau) = f((y - mu)/sqrt(tau); 0, 1) / sqrt(tau)
    lhs = float(t_logpdf(y, mu, tau, nu))
    rhs = float(t_logpdf((y - mu) / math.sqrt(tau), 0.0, 1.0, nu)) - 0.5 * math.log(tau)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_nll_term_by_term():
    rng = np.random.default_rng(3)
    y = rng.standard_normal(50) * 2
    mu = rng.standard_normal(50)
    tau, nu = 1.7, 5.0
    oracle = 0.0
    for yi, mi in zip(y, mu):
        oracle -= (math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2) - 0.5 * math.log(nu * math.pi * tau)
                   - (nu + 1) / 2 * math.log1p((yi - mi) ** 2 / (nu * tau)))
    assert neg_log_likelihood(y, mu, tau, nu) == pytest.approx(oracle, rel=1e-12)


def test_nll_validates():
    with pytest.raises(ValueError):
        neg_log_likelihood(np.ones(3), np.ones(2), 1.0, 5.0)
    with pytest.raises(ValueError):
        neg_log_likelihood(np.ones(3), np.ones(3), 0.0, 5.0)


PAIRS = [(TSpec(0, 1, 5), TSpec(0, 1, math.inf)), (TSpec(0, 1, math.inf), TSpec(0, 1, 1)),
         (TSpec(0, 1, 1), TSpec(0, 1, 1.9)), (TSpec(0.5, 2, 3), TSpec(0, 1, 1)),
         (TSpec(0, 1, 1.9), TSpec(0, 1, 5))]


@pytest.mark.parametrize("p,q", PAIRS)
def test_kl_nonnegative_and_zero_on_diagonal(p, q):
    assert kl_divergence(p, q) > 0
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-9)


def test_kl_gaussian_closed_form():
    p, q = TSpec(1, 2, math.inf), TSpec(0, 3, math.inf)
    exact = 0.5 * (math.log(3 / 2) + (2 + 1) / 3 - 1)
    assert kl_divergence(p, q) == pytest.approx(exact, rel=1e-8)


def test_kl_cauchy_vs_gaussian_is_infinite():
    assert kl_divergence(TSpec(0, 1, 1), TSpec(0, 1, math.inf)) == math.inf
    assert math.isfinite(kl_divergence(TSpec(0, 1, math.inf), TSpec(0, 1, 1)))


def test_js_symmetric():
    a, b = TSpec(0, 1, 1), TSpec(0, 1, math.inf)
    assert js_divergence(a, b) == pytest.approx(js_divergence(b, a), rel=1e-10)
    assert js_divergence(a, b) == math.inf


def test_grid_m3_equal_gaps():
    g = build_dof_grid(3)
    assert g.values[0] == 1 and math.isinf(g.values[-1])
    gaps = [_js_std(a, b) for a, b in zip(g.values[:-1], g.values[1:])]
    assert max(abs(x - g.js_step) / g.js_step for x in gaps) < 1e-3


def test_grid_rejects():
    with pytest.raises(ValueError):
        build_dof_grid(1)
    with pytest.raises(ValueError):
        build_dof_grid(3, nu_min=5, nu_max=2)


def test_sample_t_reproducible_and_heavy():
    s1 = sample_t(1000, TSpec(0, 1, 5), np.random.default_rng(0))
    s2 = sample_t(1000, TSpec(0, 1, 5), np.random.default_rng(0))
    np.testing.assert_array_equal(s1, s2)
    big = sample_t(200_000, TSpec(2, 4, 5), np.random.default_rng(1))
    assert abs(big.mean() - 2) < 0.03
    assert big.var() == pytest.approx(4 * 5 / 3, rel=0.05)


def test_nu_text():
    assert parse_nu("inf") == math.inf and parse_nu("1.9") == 1.9
    assert format_nu(math.inf) == "inf" and format_nu(5.0) == "5"
    assert parse_grid(["inf", "1", "5"]) == (1.0, 5.0, math.inf)
