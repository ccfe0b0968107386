"""scikit-learn compatible estimators.

``StudentTRegressor`` fits one fixed design (all columns of ``X``) by MML or
ML; ``MMLSelector`` searches predictor subsets and degrees of freedom and can
be used as a feature selector in a ``Pipeline``.
"""

from __future__ import annotations


import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import Dataset, ModelStructure, Scheme
from .criteria import Criterion
from .distributions import default_grid, t_logpdf
from .estimation import EMConfig, mml_fit, ml_fit
from .search import enumerate_structures, lasso_path_structures, report_from_table, score_table


def _check_nu(nu):
    nu = float(nu)
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return nu


class StudentTRegressor(RegressorMixin, BaseEstimator):
    """Linear regression with Student-t errors, estimated by MML or ML.

    Parameters
    ----------
    nu : float, default=1.9
        Degrees of freedom; ``float('inf')`` gives Gaussian errors.
    method : {'mml', 'ml'}, default='mml'
    max_iter : int, default=500
        EM iteration cap.
    tol : float, default=1e-8
        Relative change of the objective that ends the EM loop.

    Attributes
    ----------
    coef_, intercept_ : fitted coefficients on the raw scale of ``X``.
    scale_ : float
        Fitted tau (squared scale).
    K_ : float
        Prior radius estimated from the ML coefficients.
    codelength_ : dict or None
        Message-length breakdown in nits (MML only).
    """

    def __init__(self, nu=1.9, method="mml", max_iter=500, tol=1e-8):
        self.nu = nu
        self.method = method
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, ensure_min_samples=3)
        if self.method not in ("mml", "ml"):
            raise ValueError("method must be 'mml' or 'ml'")
        nu = _check_nu(self.nu)
        ds = Dataset.from_arrays(X, y)
        st = ModelStructure(tuple(range(ds.q)))
        cfg = EMConfig(self.max_iter, self.tol)
        res = mml_fit(ds, st, nu, cfg) if self.method == "mml" else ml_fit(ds, st, nu, cfg)
        p = res.params
        self.coef_ = p.beta.copy()
        self.intercept_ = p.beta0 - float(ds.means @ p.beta)
        self.scale_ = p.tau
        self.nu_ = nu
        self.K_ = res.K.k_value
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.objective_ = res.objective
        self.codelength_ = res.breakdown.as_dict() if res.breakdown is not None else None
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        return self.intercept_ + X @ self.coef_

    def log_likelihood(self, X, y) -> float:
        """Total Student-t log-likelihood of ``(X, y)`` under the fit."""
        return float(np.sum(t_logpdf(np.asarray(y, float), self.predict(X), self.scale_, self.nu_)))


class MMLSelector(SelectorMixin, RegressorMixin, BaseEstimator):
    """Joint choice of predictor subset and degrees of freedom.

    Parameters
    ----------
    criterion : {'mml', 'bic', 'aicc', 'mdl'}, default='mml'
    candidates : {'subsets', 'nested', 'lasso'}, default='subsets'
        How candidate structures are generated.
    scheme : {'subsets', 'nested'} or None
        Structure coding; defaults to 'nested' for nested and lasso candidates.
    dof_grid : sequence of float, default=(1, 1.9, 5, inf)
    n_jobs : int, default=1
    """

    def __init__(self, criterion="mml", candidates="subsets", scheme=None,
                 dof_grid=default_grid(), max_iter=500, tol=1e-8, n_jobs=1):
        self.criterion = criterion
        self.candidates = candidates
        self.scheme = scheme
        self.dof_grid = dof_grid
        self.max_iter = max_iter
        self.tol = tol
        self.n_jobs = n_jobs

    def _structures(self, ds):
        if self.candidates == "subsets":
            return list(enumerate_structures(ds.q, Scheme.ALL_SUBSETS))
        if self.candidates == "nested":
            return list(enumerate_structures(ds.q, Scheme.NESTED))
        if self.candidates == "lasso":
            return lasso_path_structures(ds)
        raise ValueError(f"unknown candidates {self.candidates!r}")

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, ensure_min_samples=3)
        crit = Criterion.parse(self.criterion)
        names = getattr(self, "feature_names_in_", None)
        ds = Dataset.from_arrays(X, y, None if names is None else list(names))
        scheme = self.scheme or ("subsets" if self.candidates == "subsets" else "nested")
        grid = tuple(_check_nu(v) for v in self.dof_grid)
        table = score_table(ds, self._structures(ds), grid, scheme,
                            EMConfig(self.max_iter, self.tol), (crit,), self.n_jobs)
        report = report_from_table(table, crit)
        best = report.best
        g = list(best.structure.gamma)
        self.report_ = report
        self.support_ = np.zeros(ds.q, dtype=bool)
        self.support_[g] = True
        self.nu_ = best.nu
        self.score_ = best.score
        self.coef_ = np.zeros(ds.q)
        self.coef_[g] = best.params.beta
        self.intercept_ = best.params.beta0 - float(ds.means @ self.coef_)
        self.scale_ = best.params.tau
        self.n_iter_ = best.iterations
        self.posteriors_ = report.posteriors
        self.marginal_inclusion_ = report.marginal_inclusion
        return self

    def _get_support_mask(self):
        check_is_fitted(self)
        return self.support_

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        return self.intercept_ + X @ self.coef_

    def log_likelihood(self, X, y) -> float:
        return float(np.sum(t_logpdf(np.asarray(y, float), self.predict(X), self.scale_, self.nu_)))
