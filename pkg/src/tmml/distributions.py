"""Student-t density, divergences, the degrees-of-freedom grid and sampling.

An infinite ``nu`` is the Gaussian limit and is handled by its own branch in
every function rather than by plugging in a large number.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LGAMMA_HALF = math.lgamma(0.5)


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""


@dataclass(frozen=True)
class TSpec:
    """Location-scale Student-t; ``tau`` is the squared scale."""

    mu: float = 0.0
    tau: float = 1.0
    nu: float = math.inf

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")

    @property
    def gaussian(self) -> bool:
        return math.isinf(self.nu)


@dataclass(frozen=True)
class DofGrid:
    values: tuple[float, ...]
    js_step: float

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


def _log_norm_const(nu: float) -> float:
    # lgamma((nu+1)/2) - lgamma(nu/2), via betaln to stay accurate for large nu
    return _LGAMMA_HALF - special.betaln(0.5 * nu, 0.5)


def t_logpdf(y, mu=0.0, tau: float = 1.0, nu: float = math.inf):
    """Log density of t(mu, tau, nu) evaluated at ``y`` (broadcasts)."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    r2 = (y - mu) ** 2 / tau
    if math.isinf(nu):
        out = -LOG_SQRT_2PI - 0.5 * math.log(tau) - 0.5 * r2
    else:
        out = (_log_norm_const(nu) - 0.5 * math.log(math.pi * nu * tau)
               - 0.5 * (nu + 1.0) * np.log1p(r2 / nu))
    return out if out.ndim else float(out)


def neg_log_likelihood(y, mu, tau: float, nu: float) -> float:
    """Negative log-likelihood of ``y`` under t(mu_i, tau, nu) errors."""
    y = np.asarray(y, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), y.shape) if np.ndim(mu) == 0 else np.asarray(mu, dtype=float)
    if y.shape != mu.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {mu.shape}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    n = y.shape[0]
    r2 = (y - mu) ** 2 / tau
    if math.isinf(nu):
        return float(n * LOG_SQRT_2PI + 0.5 * n * math.log(tau) + 0.5 * r2.sum())
    return float(-n * _log_norm_const(nu) + 0.5 * n * math.log(math.pi * nu * tau)
                 + 0.5 * (nu + 1.0) * np.log1p(r2 / nu).sum())


def _spec_logpdf(x: float, s: TSpec) -> float:
    r2 = (x - s.mu) ** 2 / s.tau
    if s.gaussian:
        return -LOG_SQRT_2PI - 0.5 * math.log(s.tau) - 0.5 * r2
    return (_log_norm_const(s.nu) - 0.5 * math.log(math.pi * s.nu * s.tau)
            - 0.5 * (s.nu + 1.0) * math.log1p(r2 / s.nu))


def kl_divergence(p: TSpec, q: TSpec, tol: float = 1e-10) -> float:
    """KL(p || q) by adaptive Gauss-Kronrod quadrature.

    The real line is mapped through ``x = c + s sinh(u)``; Cauchy tails then
    decay like ``exp(-|u|)`` in the new variable. Returns ``inf`` when ``q`` is
    Gaussian and ``p`` has no finite variance (nu <= 2).
    """
    if p == q:
        return 0.0
    if q.gaussian and not p.gaussian and p.nu <= 2:
        return math.inf
    c = p.mu
    s = math.sqrt(max(p.tau, q.tau))
    log_s = math.log(s)

    def integrand(u: float) -> float:
        if abs(u) > 300.0:
            return 0.0
        x = c + s * math.sinh(u)
        lp = _spec_logpdf(x, p)
        log_w = lp + log_s + math.log(math.cosh(u))
        if log_w < -700.0:
            return 0.0
        return math.exp(log_w) * (lp - _spec_logpdf(x, q))

    total = 0.0
    for a, b in ((-math.inf, 0.0), (0.0, math.inf)):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(integrand, a, b, epsabs=tol, epsrel=tol, limit=400)
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"KL quadrature failed for p={p}, q={q}: {exc}") from exc
        if err > 1e-8:
            raise QuadratureError(f"KL quadrature error estimate {err:.3g} too large for p={p}, q={q}")
        total += val
    return max(total, 0.0)


def js_divergence(p: TSpec, q: TSpec) -> float:
    """Average of the two directed KL divergences."""
    return 0.5 * kl_divergence(p, q) + 0.5 * kl_divergence(q, p)


def _js_std(a: float, b: float) -> float:
    return js_divergence(TSpec(0.0, 1.0, a), TSpec(0.0, 1.0, b))


def _next_dof(a: float, c: float, nu_max: float) -> float | None:
    """Solve JS(t_a, t_b) = c for b in (a, nu_max]; None when c is unreachable."""
    if _js_std(a, nu_max) <= c:
        return None
    u_lo = 0.0 if math.isinf(nu_max) else 1.0 / nu_max

    def h(u):
        b = math.inf if u == 0.0 else 1.0 / u
        return _js_std(a, b) - c

    u = optimize.brentq(h, u_lo, 1.0 / a, xtol=1e-14, rtol=1e-12)
    return math.inf if u == 0.0 else 1.0 / u


def _march(c: float, m: int, nu_min: float, nu_max: float) -> list[float] | None:
    grid = [nu_min]
    for _ in range(m - 2):
        b = _next_dof(grid[-1], c, nu_max)
        if b is None:
            return None
        grid.append(b)
    return grid


def build_dof_grid(m: int = 4, nu_min: float = 1.0, nu_max: float = math.inf,
                   rtol: float = 1e-7) -> DofGrid:
    """Degrees-of-freedom candidates equally spaced in JS divergence.

    Outer bisection on the common gap ``c``; for each trial ``c`` the interior
    points are found one after another with Brent's method.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if not nu_max > nu_min:
        raise ValueError("nu_max must exceed nu_min")
    if m == 2:
        return DofGrid((nu_min, nu_max), _js_std(nu_min, nu_max))

    def residual(c):
        grid = _march(c, m, nu_min, nu_max)
        if grid is None:
            return None, -math.inf
        return grid, _js_std(grid[-1], nu_max) - c

    lo, hi = 0.0, 1e-3
    while True:
        _, r = residual(hi)
        if r < 0:
            break
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise RuntimeError("could not bracket the JS step")
    grid = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g, r = residual(mid)
        if r >= 0:
            lo, grid = mid, g
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    c = lo
    if grid is None:
        grid, _ = residual(c)
    values = tuple(grid) + (nu_max,)
    gaps = [_js_std(a, b) for a, b in zip(values[:-1], values[1:])]
    if any(b <= a for a, b in zip(values[:-1], values[1:])):
        raise RuntimeError(f"grid not increasing: {values}")
    if max(abs(gp - c) for gp in gaps) > 1e-4 * c:
        raise RuntimeError(f"JS gaps not equal: {gaps}")
    return DofGrid(values, c)


def sample_t(n: int, spec: TSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` values as a normal scale mixture with Gamma(nu/2, nu/2) precisions."""
    if n < 1:
        raise ValueError("n must be positive")
    z = rng.standard_normal(n)
    if spec.gaussian:
        return spec.mu + math.sqrt(spec.tau) * z
    w = rng.gamma(0.5 * spec.nu, 2.0 / spec.nu, size=n)
    return spec.mu + math.sqrt(spec.tau) * z / np.sqrt(w)


def default_grid() -> tuple[float, ...]:
    """The rounded four-point grid used for selection: (1, 1.9, 5, inf)."""
    return (1.0, 1.9, 5.0, math.inf)


def format_nu(nu: float) -> str:
    return "inf" if math.isinf(nu) else f"{nu:g}"


def parse_nu(text: str | float) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    t = text.strip().lower()
    return math.inf if t in ("inf", "infinity", "gauss", "gaussian") else float(t)


def parse_grid(values: Sequence[str | float]) -> tuple[float, ...]:
    return tuple(sorted(parse_nu(v) for v in values))
