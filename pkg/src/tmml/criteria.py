"""Baseline criteria scored at maximum-likelihood fits: BIC, AICc and MDL denoising.

Scores are in nits on the negative log-likelihood scale (no factor of two).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class Criterion(str, enum.Enum):
    MML = "mml"
    BIC = "bic"
    AICC = "aicc"
    MDL = "mdl"

    @classmethod
    def parse(cls, value: "Criterion | str") -> "Criterion":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown criterion {value!r}; expected one of "
                             f"{[c.value for c in cls]}") from None


@dataclass(frozen=True)
class CriterionScore:
    name: Criterion
    value: float
    k: int


def n_free_params(p: int) -> int:
    """Coefficients plus intercept and scale."""
    return p + 2


def bic(nll: float, k: int, n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return nll + 0.5 * k * math.log(n)


def aicc(nll: float, k: int, n: int) -> float:
    if n <= k + 1:
        raise ValueError(f"AICc undefined for n={n}, k={k}")
    return nll + k + 2.0 * k * (k + 1) / (n - k - 1)


def mdl_denoising(tau_hat: float, R_hat: float, n: int, p: int) -> float:
    """Rissanen's denoising criterion for Gaussian regression, unknown constant dropped.

    ``tau_hat`` is RSS/(n-p-1) and ``R_hat`` the fitted sum of squares over n.
    For the intercept-only model the signal term is dropped (p = 0 has no R).
    """
    m = n - p - 1
    if m <= 0:
        raise ValueError(f"need n > p + 1 (n={n}, p={p})")
    if not tau_hat > 0:
        raise ValueError("tau_hat must be positive")
    out = 0.5 * m * math.log(tau_hat / m) + 0.5 * n * math.log(2.0 * n * math.pi * math.e) - 3.0 * math.log(2.0)
    if p == 0:
        return out + 0.5 * math.log(m)
    if not R_hat > 0:
        raise ValueError("R_hat must be positive")
    return out + 0.5 * (p + 1) * math.log(R_hat / (p + 1)) + 0.5 * math.log((p + 1) * m)


def score(criterion: Criterion | str, nll: float, p: int, n: int) -> CriterionScore:
    """BIC or AICc for a fitted model with ``p`` predictors."""
    c = Criterion.parse(criterion)
    k = n_free_params(p)
    if c is Criterion.BIC:
        return CriterionScore(c, bic(nll, k, n), k)
    if c is Criterion.AICC:
        return CriterionScore(c, aicc(nll, k, n), k)
    raise ValueError(f"{c.value} is not an NLL-based criterion")
