import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tmml.core import Dataset, ModelStructure
from tmml.criteria import Criterion, aicc, bic, mdl_denoising, n_free_params, score
from tmml.estimation import ml_fit, mml_fit


def test_values():
    assert bic(100.0, 3, 50) == pytest.approx(100 + 1.5 * math.log(50))
    assert aicc(100.0, 3, 50) == pytest.approx(103 + 24 / 46)
    assert n_free_params(4) == 6
    s = score("bic", 10.0, 2, 30)
    assert s.k == 4 and s.name is Criterion.BIC
    with pytest.raises(ValueError):
        score("mml", 10.0, 2, 30)


def test_aicc_undefined():
    with pytest.raises(ValueError):
        aicc(1.0, 5, 6)


@given(st.floats(-1e4, 1e4), st.integers(1, 10), st.integers(20, 1000))
def test_monotone(nll, k, n):
    for f in (bic, aicc):
        assert f(nll + 1.0, k, n) > f(nll, k, n)
        assert f(nll, k + 1, n) > f(nll, k, n)


def test_mdl_literal():
    n, p, tau, R = 100, 3, 2.0, 5.0
    m = n - p - 1
    expect = (m / 2 * math.log(tau / m) + (p + 1) / 2 * math.log(R / (p + 1))
              + 0.5 * math.log((p + 1) * m) + n / 2 * math.log(2 * n * math.pi * math.e) - 3 * math.log(2))
    assert mdl_denoising(tau, R, n, p) == pytest.approx(expect)
    assert math.isfinite(mdl_denoising(tau, 0.0, n, 0))
    with pytest.raises(ValueError):
        mdl_denoising(tau, 0.0, n, 2)
    with pytest.raises(ValueError):
        mdl_denoising(tau, R, 4, 3)


def test_mdl_penalty_can_go_negative_while_mml_cannot():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 3))
    ds = Dataset.from_arrays(X, rng.standard_normal(60))
    g = ml_fit(ds, ModelStructure((0, 1, 2)), math.inf)
    R = g.K.k_value / ds.n
    assert (3 / 2 + 1 / 2) * math.log(R) < 0
    assert mml_fit(ds, ModelStructure((0, 1, 2)), math.inf).breakdown.assertion_beta >= 0


def _gap(n, p, signal, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    ds = Dataset.from_arrays(X, X @ np.full(p, signal) + 0.05 * rng.standard_normal(n))
    st_ = ModelStructure(tuple(range(p)))
    bd = mml_fit(ds, st_, math.inf, scheme="nested").breakdown
    g = ml_fit(ds, st_, math.inf)
    K = g.K.k_value
    mdl = mdl_denoising(g.params.tau * n / (n - p - 1), K / n, n, p)
    # the closed-form gap leaves out I(K) and I(gamma)
    gap = bd.total - bd.structure - bd.hyper_k - mdl
    form = -0.5 * math.log(K) + 0.5 * (math.log(n * p / (p + 2)) + p * math.log((p + 1) / (p + 2)))
    return gap, form, K


@pytest.mark.parametrize("p", [2, 5])
def test_high_snr_gap_tracks_closed_form(p):
    # agreement is up to a constant free of n; the K dependence is exactly -1/2 log K
    offs = [g - f for g, f, _ in (_gap(n, p, 3.0) for n in (500, 2000, 8000))]
    assert max(offs) - min(offs) < 0.5
    g1, _, k1 = _gap(2000, p, 3.0)
    g2, _, k2 = _gap(2000, p, 30.0)
    assert (g2 - g1) == pytest.approx(-0.5 * math.log(k2 / k1), abs=0.05)
