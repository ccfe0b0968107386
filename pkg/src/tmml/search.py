"""Candidate generation, criterion-driven selection and MML model posteriors."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from sklearn.linear_model import lasso_path

from .core import CodelengthBreakdown, Dataset, ModelStructure, Scheme, TParams
from .criteria import Criterion, aicc, bic, mdl_denoising, n_free_params
from .distributions import default_grid, format_nu
from .estimation import BatchFit, EMConfig, fit_many

MAX_SUBSETS_Q = 25


def enumerate_structures(q: int, scheme: Scheme | str) -> Iterator[ModelStructure]:
    """Nested prefixes (q + 1 of them) or all 2^q subsets, smallest first."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.NESTED:
        for p in range(q + 1):
            yield ModelStructure(tuple(range(p)), Scheme.NESTED)
        return
    if q > MAX_SUBSETS_Q:
        raise ValueError(f"all-subsets search is capped at q={MAX_SUBSETS_Q}, got q={q}")
    for p in range(q + 1):
        for g in itertools.combinations(range(q), p):
            yield ModelStructure(g)


def lasso_path_structures(dataset: Dataset, n_lambda: int = 100,
                          eps: float = 1e-3) -> list[ModelStructure]:
    """Distinct supports along a Gaussian lasso path, null model first.

    Columns are standardised for the path only; the lambda grid runs
    log-uniformly from the smallest lambda with empty support down to
    ``eps`` times that value.
    """
    X = dataset.X
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Xs = X / sd
    yc = dataset.y - dataset.y.mean()
    lam_max = np.max(np.abs(Xs.T @ yc)) / dataset.n
    out = [ModelStructure(())]
    if lam_max <= 0:
        return out
    alphas = np.geomspace(lam_max, eps * lam_max, n_lambda)
    _, coefs, _ = lasso_path(Xs, yc, alphas=alphas, max_iter=10000, tol=1e-10)
    seen = {()}
    for k in range(coefs.shape[1]):
        g = tuple(np.flatnonzero(np.abs(coefs[:, k]) > 0).tolist())
        if g not in seen:
            seen.add(g)
            out.append(ModelStructure(g))
    return out


@dataclass
class CandidateScore:
    structure: ModelStructure
    nu: float
    criterion: Criterion
    score: float
    params: TParams
    K: float
    converged: bool
    breakdown: CodelengthBreakdown | None = None
    iterations: int = 0

    def as_dict(self, names: Sequence[str] | None = None) -> dict:
        d = {
            "gamma": list(self.structure.gamma),
            "p": self.structure.p,
            "nu": format_nu(self.nu),
            "criterion": self.criterion.value,
            "score": self.score,
            "beta0": self.params.beta0,
            "beta": self.params.beta.tolist(),
            "tau": self.params.tau,
            "K": self.K,
            "converged": bool(self.converged),
        }
        if names is not None:
            d["predictors"] = self.structure.labels(names)
        if self.breakdown is not None:
            d["codelength"] = self.breakdown.as_dict()
        return d


@dataclass
class SelectionReport:
    criterion: Criterion
    names: tuple[str, ...]
    structures: list[ModelStructure]
    ranked: list[CandidateScore]
    posteriors: np.ndarray
    marginal_inclusion: np.ndarray
    n_failed: int = 0

    @property
    def best(self) -> CandidateScore:
        return self.ranked[0]

    def to_dict(self, top: int | None = None) -> dict:
        ranked = self.ranked if top is None else self.ranked[:top]
        return {
            "criterion": self.criterion.value,
            "names": list(self.names),
            "best": self.best.as_dict(self.names),
            "ranked": [c.as_dict(self.names) for c in ranked],
            "structures": [list(s.gamma) for s in self.structures],
            "posteriors": self.posteriors.tolist(),
            "marginal_inclusion": dict(zip(self.names, self.marginal_inclusion.tolist())),
            "n_failed": self.n_failed,
        }


@dataclass
class ScoreTable:
    """ML and MML fits of every structure at every ``nu`` of the grid."""

    dataset: Dataset
    structures: list[ModelStructure]
    nus: tuple[float, ...]
    scheme: Scheme
    ml: list[BatchFit]
    mml: list[BatchFit] = field(default_factory=list)
    gauss: BatchFit | None = None

    def scores(self, criterion: Criterion | str) -> np.ndarray:
        """Array (n_structures, n_nu); failed fits score +inf."""
        c = Criterion.parse(criterion)
        n = self.dataset.n
        p = np.array([s.p for s in self.structures])
        k = n_free_params(p)
        if c is Criterion.MML:
            if not self.mml:
                raise ValueError("table was built without MML fits")
            out = np.column_stack([f.total for f in self.mml])
        elif c is Criterion.BIC:
            out = np.column_stack([np.array([bic(v, kk, n) for v, kk in zip(f.nll, k)]) for f in self.ml])
        elif c is Criterion.AICC:
            out = np.column_stack([np.array([aicc(v, kk, n) if n > kk + 1 else np.inf
                                             for v, kk in zip(f.nll, k)]) for f in self.ml])
        else:
            g = self.gauss
            col = np.full(len(self.structures), np.inf)
            for i, st in enumerate(self.structures):
                if g.failed[i]:
                    continue
                tau_hat = g.tau[i] * n / (n - st.p - 1)
                col[i] = mdl_denoising(tau_hat, g.K[i] / n, n, st.p) if (st.p == 0 or g.K[i] > 0) else np.inf
            out = np.full((len(self.structures), len(self.nus)), np.inf)
            inf_cols = [j for j, nu in enumerate(self.nus) if math.isinf(nu)]
            out[:, inf_cols[0] if inf_cols else -1] = col
        return np.where(np.isfinite(out), out, np.inf)

    def fit(self, criterion: Criterion | str, i: int, j: int) -> BatchFit:
        c = Criterion.parse(criterion)
        if c is Criterion.MML:
            return self.mml[j]
        if c is Criterion.MDL:
            return self.gauss
        return self.ml[j]

    def candidate(self, criterion, i: int, j: int, value: float) -> CandidateScore:
        c = Criterion.parse(criterion)
        bf = self.fit(c, i, j)
        bd = bf.breakdown(i) if c is Criterion.MML else None
        return CandidateScore(self.structures[i], bf.nu, c, float(value), bf.params(i),
                              float(bf.K[i]), bool(bf.converged[i]), bd, int(bf.iterations[i]))


def _fit_chunk(args):
    dataset, structures, nus, scheme, config, want_mml, want_gauss = args
    ml, mml = [], []
    for nu in nus:
        f = fit_many(dataset, structures, nu, "ml", config, scheme)
        ml.append(f)
        if want_mml:
            mml.append(fit_many(dataset, structures, nu, "mml", config, scheme, K=f.K))
    gauss = None
    if want_gauss:
        inf_j = [j for j, nu in enumerate(nus) if math.isinf(nu)]
        gauss = ml[inf_j[0]] if inf_j else fit_many(dataset, structures, math.inf, "ml", config, scheme)
    return ml, mml, gauss


def _concat(parts: list[BatchFit]) -> BatchFit:
    if len(parts) == 1:
        return parts[0]
    f0 = parts[0]
    cat = lambda name: np.concatenate([getattr(f, name) for f in parts])
    comps = {k: np.concatenate([f.components[k] for f in parts]) for k in f0.components}
    return BatchFit(sum((f.structures for f in parts), []), f0.nu, f0.method,
                    cat("beta0"), np.vstack([f.coef for f in parts]), cat("tau"), cat("K"),
                    cat("nll"), cat("iterations"), cat("converged"), cat("failed"), comps)


def default_workers() -> int:
    return os.cpu_count() or 1


def score_table(dataset: Dataset, structures: Sequence[ModelStructure],
                dof_grid: Sequence[float] = default_grid(), scheme: Scheme | str = Scheme.ALL_SUBSETS,
                config: EMConfig = EMConfig(), criteria: Sequence[Criterion | str] = ("mml", "bic", "aicc"),
                workers: int = 1, chunk_size: int = 2048) -> ScoreTable:
    """Fit every structure at every grid value; chunks may run in parallel.

    Results are reassembled in structure order, so the table does not depend
    on the worker count.
    """
    structures = list(structures)
    if not structures:
        raise ValueError("at least one structure is required")
    crits = {Criterion.parse(c) for c in criteria}
    nus = tuple(dof_grid)
    scheme = Scheme.parse(scheme)
    want_mml = Criterion.MML in crits
    want_gauss = Criterion.MDL in crits
    chunks = [structures[i:i + chunk_size] for i in range(0, len(structures), chunk_size)]
    jobs = [(dataset, ch, nus, scheme, config, want_mml, want_gauss) for ch in chunks]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_fit_chunk, jobs))
    else:
        results = [_fit_chunk(j) for j in jobs]
    ml = [_concat([r[0][j] for r in results]) for j in range(len(nus))]
    mml = [_concat([r[1][j] for r in results]) for j in range(len(nus))] if want_mml else []
    gauss = _concat([r[2] for r in results]) if want_gauss else None
    return ScoreTable(dataset, structures, nus, scheme, ml, mml, gauss)


def _order(table: ScoreTable, S: np.ndarray) -> list[tuple[int, int]]:
    """Candidate (structure, nu) pairs sorted by score, then p, then gamma."""
    pairs = [(i, j) for i in range(S.shape[0]) for j in range(S.shape[1]) if np.isfinite(S[i, j])]
    st = table.structures
    pairs.sort(key=lambda ij: (S[ij], st[ij[0]].p, st[ij[0]].gamma))
    return pairs


def model_posteriors(scores: Sequence[float]) -> np.ndarray:
    """exp(-codelength) normalised, computed relative to the minimum."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("no codelengths given")
    finite = np.isfinite(s)
    if not np.any(finite):
        raise ValueError("no finite codelengths")
    w = np.zeros_like(s)
    w[finite] = np.exp(-(s[finite] - s[finite].min()))
    return w / w.sum()


def marginal_inclusion(posteriors, structures: Sequence[ModelStructure], q: int) -> np.ndarray:
    """Posterior mass on structures that contain each predictor."""
    posteriors = np.asarray(posteriors, dtype=float)
    if len(posteriors) != len(structures):
        raise ValueError("posteriors and structures are misaligned")
    out = np.zeros(q)
    for w, st in zip(posteriors, structures):
        if st.gamma and st.gamma[-1] >= q:
            raise IndexError("structure index out of range")
        out[list(st.gamma)] += w
    return np.clip(out, 0.0, 1.0)


def report_from_table(table: ScoreTable, criterion: Criterion | str, top: int | None = None) -> SelectionReport:
    c = Criterion.parse(criterion)
    S = table.scores(c)
    order = _order(table, S)
    if not order:
        raise RuntimeError("every candidate fit failed")
    keep = order if top is None else order[:top]
    ranked = [table.candidate(c, i, j, S[i, j]) for i, j in keep]
    per_structure = S.min(axis=1)
    post = model_posteriors(per_structure)
    marg = marginal_inclusion(post, table.structures, table.dataset.q)
    n_failed = int(np.sum(~np.isfinite(per_structure)))
    return SelectionReport(c, table.dataset.names, table.structures, ranked, post, marg, n_failed)


def select(dataset: Dataset, structures: Sequence[ModelStructure],
           dof_grid: Sequence[float] = default_grid(), criterion: Criterion | str = "mml",
           scheme: Scheme | str = Scheme.ALL_SUBSETS, config: EMConfig = EMConfig(),
           workers: int = 1, top: int | None = None) -> SelectionReport:
    """Score all (structure, nu) pairs with one criterion and rank them.

    Posteriors are computed per structure from its best score over the grid.
    """
    table = score_table(dataset, structures, dof_grid, scheme, config, (criterion,), workers)
    return report_from_table(table, criterion, top)
