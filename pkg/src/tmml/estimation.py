"""ML and MML estimation for Student-t regression by EM.

The t likelihood is written as a normal scale mixture; each EM pass computes
the expected precisions, refits the coefficients by weighted least squares and
then updates the scale. Two code paths are provided: the per-structure
functions (``ml_fit``/``mml_fit``) and ``fit_many``, which runs the same
iteration for a whole batch of structures at once using stacked BLAS calls.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import codelength as cl
from .core import Dataset, ModelStructure, Scheme, TParams, submatrix
from .distributions import _log_norm_const, neg_log_likelihood

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """A structure could not be fitted (singular design or perfect fit)."""


@dataclass(frozen=True)
class EMConfig:
    max_iter: int = 500
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


@dataclass
class FitResult:
    """Outcome of one EM run. ``objective`` is the message length (MML) or NLL (ML)."""

    params: TParams
    K: cl.HyperK
    objective: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)
    breakdown: object | None = None


def wls_fit(Xs: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted least squares with an unpenalised intercept."""
    Xs = np.asarray(Xs, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    n = y.shape[0]
    A = np.column_stack([np.ones(n), Xs]) * np.sqrt(w)[:, None]
    coef, _, rank, _ = np.linalg.lstsq(A, y * np.sqrt(w), rcond=None)
    if rank < A.shape[1]:
        raise cl.SingularDesignError("augmented design is rank deficient")
    return float(coef[0]), coef[1:]


def em_weights(y, mu, tau: float, nu: float) -> np.ndarray:
    """Posterior mean of the latent precisions, (nu + 1) / (nu + delta^2)."""
    y = np.asarray(y, dtype=float)
    if math.isinf(nu):
        return np.ones_like(y)
    d2 = (y - np.asarray(mu, dtype=float)) ** 2 / tau
    return (nu + 1.0) / (nu + d2)


def estimate_K(Xs: np.ndarray, beta_ml) -> cl.HyperK:
    """K = fitted sum of squares of the ML coefficients."""
    beta_ml = np.asarray(beta_ml, dtype=float)
    if beta_ml.size == 0:
        return cl.HyperK(0.0)
    fitted = Xs @ beta_ml
    return cl.HyperK(float(fitted @ fitted))


def _tau_bracket(wss: float, n: int, p: int) -> tuple[float, float]:
    return math.log(wss / (n - 1)), math.log(wss / (n - p - 1))


def tau_objective(tau: float, wss: float, n: int, p: int, log_b: float) -> float:
    """Scale-dependent part of the conditional message length."""
    s = math.log(tau)
    return (0.5 * float(np.logaddexp(0.0, log_b - p * s)) + 0.5 * (n - 1) * s
            + wss / (2.0 * tau))


def optimize_tau(wss: float, n: int, p: int, B: float | None = None, *,
                 log_b: float | None = None) -> float:
    """Minimise 0.5 log(1 + B/tau^p) + (n-1)/2 log tau + wss/(2 tau).

    The objective is convex in log tau and its minimiser always lies between
    wss/(n-1) (no signal) and wss/(n-p-1) (strong signal), so the stationary
    point is found by Brent's method inside that bracket.
    """
    if log_b is None:
        if B is None or B < 0:
            raise ValueError("B must be non-negative")
        log_b = math.log(B) if B > 0 else -math.inf
    if not wss > 0:
        raise FitError("perfect fit: weighted residual sum of squares is zero")
    if n - p - 1 <= 0:
        raise ValueError(f"need n > p + 1, got n={n}, p={p}")
    if p == 0 or log_b == -math.inf:
        return wss / (n - 1)
    lo, hi = _tau_bracket(wss, n, p)

    def grad(s):
        sig = 0.5 * (1.0 + math.tanh(0.5 * (log_b - p * s)))
        return 0.5 * (n - 1) - 0.5 * wss * math.exp(-s) - 0.5 * p * sig

    g_lo, g_hi = grad(lo), grad(hi)
    if g_lo >= 0:
        return math.exp(lo)
    if g_hi <= 0:
        return math.exp(hi)
    s = optimize.brentq(grad, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return math.exp(s)


def _check(dataset: Dataset, structure: ModelStructure):
    if dataset.n <= structure.p + 2:
        raise ValueError(f"need n > p + 2 (n={dataset.n}, p={structure.p})")
    Xs = submatrix(dataset, structure)
    cl.xtx_logdet(Xs)
    return Xs


def _nll_tau_ml(wss: float, n: int) -> float:
    return wss / n


def ml_fit(dataset: Dataset, structure: ModelStructure, nu: float,
           config: EMConfig = EMConfig()) -> FitResult:
    """Maximum likelihood for fixed ``nu`` by the classic EM iteration."""
    Xs = _check(dataset, structure)
    y, n = dataset.y, dataset.n
    b0, beta = wls_fit(Xs, y, np.ones(n))
    mu = b0 + Xs @ beta
    wss = float(np.sum((y - mu) ** 2))
    if not wss > 0:
        raise FitError("perfect fit")
    tau = wss / n
    obj = neg_log_likelihood(y, mu, tau, nu)
    history = [obj]
    converged = math.isinf(nu)
    it = 1
    while not converged and it < config.max_iter:
        w = em_weights(y, mu, tau, nu)
        b0, beta = wls_fit(Xs, y, w)
        mu = b0 + Xs @ beta
        wss = float(np.sum(w * (y - mu) ** 2))
        if not wss > 0:
            raise FitError("perfect fit")
        tau = wss / n
        new = neg_log_likelihood(y, mu, tau, nu)
        history.append(new)
        it += 1
        converged = abs(obj - new) <= config.rel_tol * max(abs(new), 1.0)
        obj = new
    params = TParams(b0, beta, tau, nu)
    return FitResult(params, estimate_K(Xs, beta), obj, it, converged, history)


def _mml_objective(y, mu, tau, nu, p, log_b):
    # message length up to terms free of (beta0, beta, tau)
    return (neg_log_likelihood(y, mu, tau, nu)
            + 0.5 * float(np.logaddexp(0.0, log_b - p * math.log(tau)))
            - 0.5 * math.log(tau))


def mml_fit(dataset: Dataset, structure: ModelStructure, nu: float,
            config: EMConfig = EMConfig(), scheme: Scheme | str = Scheme.ALL_SUBSETS,
            K: cl.HyperK | None = None) -> FitResult:
    """MML estimates for a fixed structure and ``nu``.

    K is taken from the ML fit of the same structure and ``nu`` unless given,
    and is held fixed while the EM iteration minimises the message length.
    """
    Xs = _check(dataset, structure)
    y, n, p = dataset.y, dataset.n, structure.p
    if K is None:
        K = ml_fit(dataset, structure, nu, config).K
    log_b = cl.log_B(p, K, nu)

    b0, beta = wls_fit(Xs, y, np.ones(n))
    mu = b0 + Xs @ beta
    w = np.ones(n)
    tau = optimize_tau(float(np.sum((y - mu) ** 2)), n, p, log_b=log_b)
    obj = _mml_objective(y, mu, tau, nu, p, log_b)
    history = [obj]
    converged = math.isinf(nu)
    it = 1
    while not converged and it < config.max_iter:
        w = em_weights(y, mu, tau, nu)
        b0, beta = wls_fit(Xs, y, w)
        mu = b0 + Xs @ beta
        tau = optimize_tau(float(np.sum(w * (y - mu) ** 2)), n, p, log_b=log_b)
        new = _mml_objective(y, mu, tau, nu, p, log_b)
        history.append(new)
        it += 1
        converged = abs(obj - new) <= config.rel_tol * max(abs(new), 1.0)
        obj = new
    if not converged:
        log.warning("MML EM did not converge for %s at nu=%s", structure.gamma, nu)
    params = TParams(b0, beta, tau, nu)
    bd = cl.total_message_length(dataset, structure, params, K, scheme)
    return FitResult(params, K, bd.total, it, converged, history, bd)


# ---------------------------------------------------------------------------
# batched engine
# ---------------------------------------------------------------------------

@dataclass
class BatchFit:
    """Fits of many structures at one ``nu``; coefficient rows are q wide."""

    structures: list[ModelStructure]
    nu: float
    method: str
    beta0: np.ndarray
    coef: np.ndarray
    tau: np.ndarray
    K: np.ndarray
    nll: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    failed: np.ndarray
    components: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def objective(self) -> np.ndarray:
        if self.method == "ml":
            return self.nll
        return self.total

    @property
    def total(self) -> np.ndarray:
        c = self.components
        return (c["assertion_beta"] + c["assertion_scale"] + c["detail"]
                + c["hyper_k"] + c["structure"])

    def params(self, i: int) -> TParams:
        g = list(self.structures[i].gamma)
        return TParams(float(self.beta0[i]), self.coef[i, g], float(self.tau[i]), self.nu)

    def breakdown(self, i: int):
        from .core import CodelengthBreakdown
        return CodelengthBreakdown(**{k: float(v[i]) for k, v in self.components.items()})


def _batch_tau(wss, n, p, log_b):
    """Vectorised stationary point of the scale objective (safeguarded Newton)."""
    tau = wss / (n - 1)
    signal = (p > 0) & np.isfinite(log_b)
    if not np.any(signal):
        return tau
    idx = np.flatnonzero(signal)
    w, pp, lb = wss[idx], p[idx].astype(float), log_b[idx]
    lo = np.log(w / (n - 1))
    hi = np.log(w / (n - pp - 1))
    s = 0.5 * (lo + hi)
    for _ in range(100):
        sig = 0.5 * (1.0 + np.tanh(0.5 * (lb - pp * s)))
        g = 0.5 * (n - 1) - 0.5 * w * np.exp(-s) - 0.5 * pp * sig
        h = 0.5 * w * np.exp(-s) + 0.5 * pp * pp * sig * (1.0 - sig)
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        step = s - g / h
        inside = (step > lo) & (step < hi)
        s_new = np.where(inside, step, 0.5 * (lo + hi))
        if np.all(np.abs(s_new - s) <= 1e-13 * np.maximum(1.0, np.abs(s))):
            s = s_new
            break
        s = s_new
    tau[idx] = np.exp(s)
    return tau


def _nll_rows(r2, tau, nu, n):
    if math.isinf(nu):
        return 0.5 * n * np.log(2.0 * math.pi * tau) + 0.5 * np.sum(r2, axis=1) / tau
    return (-n * _log_norm_const(nu) + 0.5 * n * np.log(math.pi * nu * tau)
            + 0.5 * (nu + 1.0) * np.sum(np.log1p(r2 / (nu * tau[:, None])), axis=1))


def _design_cache(dataset: Dataset):
    X = dataset.X
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xa = np.column_stack([np.ones(dataset.n), X / scale])
    d = Xa.shape[1]
    Z = (Xa[:, :, None] * Xa[:, None, :]).reshape(dataset.n, d * d)
    Zy = Xa * dataset.y[:, None]
    return Xa, Z, Zy, scale


def _singular(dataset: Dataset, structures) -> np.ndarray:
    G = dataset.X.T @ dataset.X
    out = np.zeros(len(structures), dtype=bool)
    for i, st in enumerate(structures):
        if st.p == 0:
            continue
        if st.p >= dataset.n - 1:
            out[i] = True
            continue
        g = list(st.gamma)
        sub = G[np.ix_(g, g)]
        d = np.sqrt(np.diag(sub))
        if np.any(d == 0):
            out[i] = True
            continue
        ev = np.linalg.eigvalsh(sub / np.outer(d, d))
        out[i] = ev[0] <= 1e-10 * ev[-1]
    return out


def fit_many(dataset: Dataset, structures: Sequence[ModelStructure], nu: float,
             method: str = "mml", config: EMConfig = EMConfig(),
             scheme: Scheme | str = Scheme.ALL_SUBSETS, K: np.ndarray | None = None,
             cache=None) -> BatchFit:
    """Run ML or MML EM for every structure at once.

    For MML, ``K`` (one value per structure) defaults to the K implied by an
    ML batch fit at the same ``nu``. Structures with a singular design or a
    perfect fit are flagged in ``failed`` and carry NaN results.
    """
    if method not in ("ml", "mml"):
        raise ValueError("method must be 'ml' or 'mml'")
    structures = list(structures)
    S, n, q = len(structures), dataset.n, dataset.q
    if method == "mml" and K is None:
        K = fit_many(dataset, structures, nu, "ml", config, scheme, cache=cache).K
    Xa, Z, Zy, scale = cache if cache is not None else _design_cache(dataset)
    d = q + 1
    y = dataset.y
    p = np.array([st.p for st in structures])
    if np.any(n <= p + 2):
        raise ValueError("need n > p + 2 for every structure")
    failed = _singular(dataset, structures)

    log_b = np.full(S, -np.inf)
    if method == "mml":
        K = np.asarray(K, dtype=float)
        for i, st in enumerate(structures):
            if not failed[i] and np.isfinite(K[i]):
                log_b[i] = cl.log_B(st.p, K[i], nu)

    groups: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for pp in np.unique(p):
        rows = np.flatnonzero(p == pp)
        cols = np.array([[0] + [j + 1 for j in structures[r].gamma] for r in rows], dtype=int)
        groups[int(pp)] = (rows, cols.reshape(len(rows), pp + 1))

    B = np.zeros((S, d))
    tau = np.full(S, np.nan)
    nll = np.full(S, np.nan)
    obj = np.full(S, np.inf)
    iters = np.zeros(S, dtype=int)
    conv = np.zeros(S, dtype=bool)
    active = ~failed
    W = np.ones((S, n))
    first = True

    while np.any(active):
        act = np.flatnonzero(active)
        Wa = W[act]
        G = (Wa @ Z).reshape(len(act), d, d)
        h = Wa @ Zy
        pos = np.full(S, -1)
        pos[act] = np.arange(len(act))
        for pp, (rows, cols) in groups.items():
            sel = active[rows]
            if not np.any(sel):
                continue
            r, c = rows[sel], cols[sel]
            ia = pos[r]
            Gs = G[ia[:, None, None], c[:, :, None], c[:, None, :]]
            hs = h[ia[:, None], c]
            sol = np.linalg.solve(Gs, hs[:, :, None])[:, :, 0]
            Br = np.zeros((len(r), d))
            np.put_along_axis(Br, c, sol, axis=1)
            B[r] = Br
        mu = B[act] @ Xa.T
        r2 = (y[None, :] - mu) ** 2
        wss = np.sum(Wa * r2, axis=1)
        bad = ~(wss > 1e-300)
        if np.any(bad):
            failed[act[bad]] = True
            active[act[bad]] = False
            keep = ~bad
            act, r2, wss, Wa = act[keep], r2[keep], wss[keep], Wa[keep]
            if act.size == 0:
                break
        if method == "ml":
            t_new = wss / n
        else:
            t_new = _batch_tau(wss, n, p[act], log_b[act])
        f_nll = _nll_rows(r2, t_new, nu, n)
        new = f_nll.copy()
        if method == "mml":
            new += 0.5 * np.logaddexp(0.0, log_b[act] - p[act] * np.log(t_new)) - 0.5 * np.log(t_new)
        tau[act], nll[act] = t_new, f_nll
        iters[act] += 1
        if math.isinf(nu):
            done = np.ones(act.size, dtype=bool)
        elif first:
            done = np.zeros(act.size, dtype=bool)
        else:
            done = np.abs(obj[act] - new) <= config.rel_tol * np.maximum(np.abs(new), 1.0)
        obj[act] = new
        conv[act[done]] = True
        active[act[done]] = False
        stop = iters[act] >= config.max_iter
        active[act[stop & ~done]] = False
        still = active[act]
        if np.any(still):
            a2 = act[still]
            if not math.isinf(nu):
                W[a2] = (nu + 1.0) / (nu + r2[still] / t_new[still, None])
        first = False

    coef = B[:, 1:] / scale
    beta0 = B[:, 0].copy()
    fitted = dataset.X @ coef.T
    K_out = np.sum(fitted ** 2, axis=0)
    for arr in (beta0, tau, nll, K_out):
        arr[failed] = np.nan
    coef[failed] = np.nan
    if np.any(~conv & ~failed):
        log.warning("%d structures hit max_iter at nu=%s", int(np.sum(~conv & ~failed)), nu)

    components: dict[str, np.ndarray] = {}
    if method == "mml":
        coding = cl.StructureCodingScheme(Scheme.parse(scheme), q)
        ok = ~failed
        t = np.where(ok, tau, 1.0)
        lb = np.where(ok, log_b, -np.inf)
        ab = np.where(np.isfinite(lb), 0.5 * np.logaddexp(0.0, lb - p * np.log(t)), 0.0)
        ratio = 1.0 if math.isinf(nu) else nu * (nu + 1.0) / (nu + 3.0) ** 2
        asc = np.log(t) + 0.5 * np.log(n * n * ratio / (2.0 * t ** 3)) + 0.5 * cl.log_kappa_pow(2)
        components = {
            "assertion_beta": np.where(ok, ab, np.nan),
            "assertion_scale": np.where(ok, asc, np.nan),
            "detail": nll + 0.5 * (p + 2),
            "hyper_k": np.full(S, cl.hyper_k_length(n)),
            "structure": np.array([cl.structure_length(coding, int(pp)) for pp in p]),
        }
        K_out = np.where(failed, np.nan, K)
    return BatchFit(structures, nu, method, beta0, coef, tau, K_out, nll, iters, conv,
                    failed, components)
