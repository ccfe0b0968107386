import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.linear_model import LinearRegression
from sklearn.pipeline import make_pipeline
from sklearn.utils.estimator_checks import parametrize_with_checks

from tmml.core import load_boston
from tmml.estimators import MMLSelector, StudentTRegressor


@parametrize_with_checks([StudentTRegressor(), MMLSelector(candidates="nested")])
def test_sklearn_compatible(estimator, check):
    check(estimator)


def test_get_set_params():
    est = StudentTRegressor(nu=5.0, method="ml")
    assert est.get_params() == {"nu": 5.0, "method": "ml", "max_iter": 500, "tol": 1e-8}
    est.set_params(nu=math.inf)
    assert clone(est).nu == math.inf
    assert "criterion" in MMLSelector().get_params()


def test_gaussian_regressor_is_ols():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 3)) + 4.0
    y = X @ [1.0, -2.0, 0.5] + 3 + rng.standard_normal(50)
    est = StudentTRegressor(nu=math.inf, method="ml").fit(X, y)
    ols = LinearRegression().fit(X, y)
    np.testing.assert_allclose(est.coef_, ols.coef_, rtol=1e-8)
    assert est.intercept_ == pytest.approx(ols.intercept_, rel=1e-8)
    np.testing.assert_allclose(est.predict(X), ols.predict(X), rtol=1e-8)


def test_invalid_params():
    X, y = np.ones((5, 1)) * np.arange(5)[:, None], np.arange(5.0) ** 2
    with pytest.raises(ValueError):
        StudentTRegressor(nu=0).fit(X, y)
    with pytest.raises(ValueError):
        StudentTRegressor(method="bayes").fit(X, y)
    with pytest.raises(ValueError):
        MMLSelector(candidates="random").fit(X, y)


def test_selector_in_pipeline():
    ds = load_boston()
    X = ds.X + ds.means
    sel = MMLSelector(candidates="nested")
    pipe = make_pipeline(sel, StudentTRegressor(nu=1.9)).fit(X, ds.y)
    assert sel.transform(X).shape[1] == int(sel.support_.sum())
    assert sel.nu_ == 1.9
    assert np.isfinite(pipe.predict(X[:5])).all()
    assert sel.log_likelihood(X, ds.y) < 0
    assert sel.marginal_inclusion_.shape == (13,)


def test_regressor_codelength_matches_library():
    ds = load_boston()
    est = StudentTRegressor().fit(ds.X + ds.means, ds.y)
    assert est.codelength_["total"] == pytest.approx(est.objective_)
    assert est.converged_
