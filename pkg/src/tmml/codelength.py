"""Message-length formulas for Student-t and Gaussian linear regression.

All quantities are in nits. ``nu = inf`` selects the Gaussian branch of each
formula explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import CodelengthBreakdown, Dataset, ModelStructure, Scheme, TParams, submatrix
from .distributions import neg_log_likelihood

PSI1 = -0.57721566490153286  # digamma(1)


class SingularDesignError(np.linalg.LinAlgError):
    """The selected columns of the design are linearly dependent."""


@dataclass(frozen=True)
class StructureCodingScheme:
    scheme: Scheme
    q: int

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.q < 1:
            raise ValueError("q must be at least 1")


@dataclass(frozen=True)
class HyperK:
    """Radius of the coefficient prior: the largest allowed fitted sum of squares."""

    k_value: float

    def __post_init__(self):
        if not self.k_value >= 0:
            raise ValueError(f"K must be non-negative, got {self.k_value}")


def _kvalue(K) -> float:
    return K.k_value if isinstance(K, HyperK) else float(K)


def log_kappa_pow(k: int) -> float:
    """log of kappa_k^k = 2^-k k pi^(1-k) exp(2 psi(1) - k)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return -k * math.log(2.0) + math.log(k) + (1 - k) * math.log(math.pi) + 2.0 * PSI1 - k


def kappa_pow(k: int) -> float:
    """Approximate lattice constant raised to its dimension, kappa_k^k."""
    return math.exp(log_kappa_pow(k))


def _nu_ratio(nu: float) -> float:
    # (nu+1)/(nu+3), which tends to 1 in the Gaussian limit
    return 1.0 if math.isinf(nu) else (nu + 1.0) / (nu + 3.0)


def xtx_logdet(Xs: np.ndarray) -> float:
    """log|X'X| via a QR factorisation; raises on rank deficiency."""
    p = Xs.shape[1]
    if p == 0:
        return 0.0
    r = np.abs(np.diag(np.linalg.qr(Xs, mode="r")))
    if r.min() <= 1e-10 * max(r.max(), 1e-300) or p > Xs.shape[0]:
        raise SingularDesignError("rank-deficient design matrix")
    return float(2.0 * np.log(r).sum())


def fisher_logdet(n: int, p: int, tau: float, nu: float, xtx_logdet: float) -> float:
    """log determinant of the Fisher information of the t regression model."""
    if n < 1 or p < 0 or not tau > 0:
        raise ValueError("invalid arguments")
    out = 2.0 * math.log(n) + xtx_logdet - math.log(2.0) - (p + 3) * math.log(tau)
    if not math.isinf(nu):
        out += math.log(nu) + (p + 1) * math.log(nu + 1.0) - (p + 2) * math.log(nu + 3.0)
    return out


def log_assertion_bracket(p: int, K, tau: float, nu: float) -> float:
    """Log of the product term inside the small-sample assertion for beta."""
    k = _kvalue(K)
    if p == 0 or k == 0.0:
        return -math.inf
    return (log_kappa_pow(p) + p * (math.log(math.pi * _nu_ratio(nu)) + math.log(k) - math.log(tau))
            - 2.0 * math.lgamma(0.5 * p + 1.0))


def assertion_beta(p: int, K, tau: float, nu: float) -> float:
    """Small-sample codelength of the coefficients given K; never negative."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    L = log_assertion_bracket(p, K, tau, nu)
    return 0.0 if L == -math.inf else 0.5 * float(np.logaddexp(0.0, L))


def log_B(p: int, K, nu: float) -> float:
    """log B, the tau-free factor of the assertion bracket (B / tau^p)."""
    return log_assertion_bracket(p, K, 1.0, nu)


def assertion_scale(n: int, tau: float, nu: float) -> float:
    """MML87 codelength for the intercept and the scale."""
    if n < 1 or not tau > 0:
        raise ValueError("invalid arguments")
    ratio = 1.0 if math.isinf(nu) else nu * (nu + 1.0) / (nu + 3.0) ** 2
    return (math.log(tau) + 0.5 * math.log(n * n * ratio / (2.0 * tau ** 3))
            + 0.5 * log_kappa_pow(2))


def detail_length(y, mu, tau: float, nu: float, p: int) -> float:
    """Codelength of the data given the parameters."""
    return neg_log_likelihood(y, mu, tau, nu) + 0.5 * (p + 2)


def hyper_k_length(n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return 0.5 * math.log(n)


def structure_length(scheme: StructureCodingScheme, p: int) -> float:
    """Codelength naming the predictor subset."""
    q = scheme.q
    if not 0 <= p <= q:
        raise ValueError(f"p={p} outside [0, {q}]")
    out = math.log(q + 1)
    if scheme.scheme is Scheme.ALL_SUBSETS:
        out += math.lgamma(q + 1) - math.lgamma(p + 1) - math.lgamma(q - p + 1)
    return out


def _coding(dataset: Dataset, scheme) -> StructureCodingScheme:
    if isinstance(scheme, StructureCodingScheme):
        return scheme
    return StructureCodingScheme(Scheme.parse(scheme), dataset.q)


def total_message_length(dataset: Dataset, structure: ModelStructure, params: TParams,
                         K, scheme) -> CodelengthBreakdown:
    """Complete message length, including the K and structure assertions."""
    if params.p != structure.p:
        raise ValueError(f"params have p={params.p}, structure has p={structure.p}")
    Xs = submatrix(dataset, structure)
    n, nu, tau = dataset.n, params.nu, params.tau
    mu = params.mean(Xs)
    return CodelengthBreakdown(
        assertion_beta=assertion_beta(structure.p, K, tau, nu),
        assertion_scale=assertion_scale(n, tau, nu),
        detail=detail_length(dataset.y, mu, tau, nu, structure.p),
        hyper_k=hyper_k_length(n),
        structure=structure_length(_coding(dataset, scheme), structure.p),
    )


def gaussian_message_length(dataset: Dataset, structure: ModelStructure, params: TParams,
                            K, scheme) -> CodelengthBreakdown:
    """Gaussian-limit criterion written out term by term.

    Components are grouped so that ``total`` equals the closed-form limit;
    the grouping matches :func:`total_message_length` at ``nu = inf``.
    """
    if not math.isinf(params.nu):
        raise ValueError("gaussian_message_length requires nu = inf")
    if params.p != structure.p:
        raise ValueError("dimension mismatch")
    Xs = submatrix(dataset, structure)
    n, p, tau = dataset.n, structure.p, params.tau
    rss = float(np.sum((dataset.y - params.mean(Xs)) ** 2))
    fit = 0.5 * n * math.log(2.0 * math.pi * tau) + rss / (2.0 * tau)
    scale = -0.5 * math.log(tau) + math.log(n) - 0.5 * math.log(4.0 * math.pi) + PSI1
    bracket = log_kappa_pow(p) + p * math.log(math.pi) - 2.0 * special.gammaln(0.5 * p + 1.0) if p else -math.inf
    k = _kvalue(K)
    if p and k > 0:
        beta_len = 0.5 * float(np.logaddexp(0.0, bracket + p * math.log(k / tau)))
    else:
        beta_len = 0.0
    return CodelengthBreakdown(
        assertion_beta=beta_len,
        assertion_scale=scale - 1.0,
        detail=fit + 0.5 * p + 1.0,
        hyper_k=0.5 * math.log(n),
        structure=structure_length(_coding(dataset, scheme), p),
    )
