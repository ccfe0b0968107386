"""Synthetic experiments and the Boston cross-validation protocol."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import Dataset, Scheme
from .criteria import Criterion
from .distributions import TSpec, default_grid, format_nu, sample_t, t_logpdf
from .estimation import EMConfig
from .search import enumerate_structures, lasso_path_structures, score_table

log = logging.getLogger(__name__)

SPARSITY = {"dense": 15, "balanced": 8, "sparse": 3}
SIGNAL = {"strong": 2.0, "moderate": 1.0, "weak": 0.5}
TRUE_NU = {"1": 1.0, "5": 5.0, "inf": math.inf}


@dataclass
class SimConfig:
    n_train: int = 50
    n_test: int = 10000
    q: int = 15
    support_size: int = 3
    signal: float = 2.0
    true_nu: float = 5.0
    true_tau: float = 1.0
    replications: int = 100
    rho: float = 0.5
    seed: int = 0
    beta0: float = 0.0

    def __post_init__(self):
        if not 0 <= self.support_size <= self.q:
            raise ValueError("support_size must lie in [0, q]")
        if min(self.n_train, self.n_test, self.q, self.replications) < 1:
            raise ValueError("counts must be positive")
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be < 1")

    @classmethod
    def named(cls, nu: str, sparsity: str, signal: str, **kw) -> "SimConfig":
        """Build a config from labels such as ('5', 'sparse', 'strong')."""
        return cls(support_size=SPARSITY[sparsity.lower()], signal=SIGNAL[signal.lower()],
                   true_nu=TRUE_NU[str(nu).lower()], **kw)

    def support(self) -> tuple[int, ...]:
        """True predictors, spread evenly across the AR(1)-correlated columns."""
        if self.support_size == 0:
            return ()
        return tuple(sorted(set(np.round(np.linspace(0, self.q - 1, self.support_size)).astype(int).tolist())))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["true_nu"] = format_nu(self.true_nu)
        return d


@dataclass
class Metrics:
    empirical_kl: float
    mae: float
    false_positives: float
    false_negatives: float
    se: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def generate_design(n: int, q: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. N(0, Q) with Q_ij = rho^|i-j|, built by the AR(1) recursion."""
    if not abs(rho) < 1:
        raise ValueError("|rho| must be < 1")
    E = rng.standard_normal((n, q))
    X = np.empty((n, q))
    X[:, 0] = E[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, q):
        X[:, j] = rho * X[:, j - 1] + c * E[:, j]
    return X


def true_coefficients(q: int, support: Sequence[int], signal: float) -> np.ndarray:
    beta = np.zeros(q)
    beta[list(support)] = signal
    return beta


def generate_response(X: np.ndarray, support: Sequence[int], signal: float, beta0: float,
                      tau: float, nu: float, rng: np.random.Generator) -> np.ndarray:
    beta = true_coefficients(X.shape[1], support, signal)
    return beta0 + X @ beta + sample_t(X.shape[0], TSpec(0.0, tau, nu), rng)


def empirical_kl(y_test, mu_true, true_spec: TSpec, mu_fit, fit_tau: float, fit_nu: float) -> float:
    """Test-sample average of log f_true - log f_fit."""
    y_test = np.asarray(y_test, dtype=float)
    mu_true = np.asarray(mu_true, dtype=float)
    mu_fit = np.asarray(mu_fit, dtype=float)
    if not (y_test.shape == mu_true.shape == mu_fit.shape):
        raise ValueError("length mismatch")
    lt = t_logpdf(y_test, mu_true, true_spec.tau, true_spec.nu)
    lf = t_logpdf(y_test, mu_fit, fit_tau, fit_nu)
    return float(np.mean(lt - lf))


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def run_replication(config: SimConfig, rep: int, criteria: Sequence[Criterion | str],
                    dof_grid: Sequence[float] = default_grid(),
                    em: EMConfig = EMConfig()) -> dict[str, dict[str, float]]:
    """One train/test draw; returns per-criterion KL, MAE, FP, FN and the choice."""
    rng = replication_rng(config.seed, rep)
    support = config.support()
    Xtr = generate_design(config.n_train, config.q, config.rho, rng)
    ytr = generate_response(Xtr, support, config.signal, config.beta0, config.true_tau, config.true_nu, rng)
    Xte = generate_design(config.n_test, config.q, config.rho, rng)
    yte = generate_response(Xte, support, config.signal, config.beta0, config.true_tau, config.true_nu, rng)
    beta = true_coefficients(config.q, support, config.signal)
    mu_true = config.beta0 + Xte @ beta
    true_spec = TSpec(0.0, config.true_tau, config.true_nu)

    ds = Dataset.from_arrays(Xtr, ytr)
    structures = lasso_path_structures(ds)
    crits = [Criterion.parse(c) for c in criteria]
    table = score_table(ds, structures, dof_grid, Scheme.NESTED, em, crits)
    Xte_c = ds.center(Xte)
    truth = set(support)
    out = {}
    for c in crits:
        S = table.scores(c)
        if not np.any(np.isfinite(S)):
            raise RuntimeError("all candidate fits failed")
        flat = [(S[i, j], structures[i].p, structures[i].gamma, i, j)
                for i in range(S.shape[0]) for j in range(S.shape[1]) if np.isfinite(S[i, j])]
        _, _, _, i, j = min(flat)
        cand = table.candidate(c, i, j, S[i, j])
        g = list(cand.structure.gamma)
        mu_fit = cand.params.beta0 + Xte_c[:, g] @ cand.params.beta
        chosen = set(g)
        out[c.value] = {
            "empirical_kl": empirical_kl(yte, mu_true, true_spec, mu_fit, cand.params.tau, cand.nu),
            "mae": float(np.mean(np.abs(yte - mu_fit))),
            "false_positives": float(len(chosen - truth)),
            "false_negatives": float(len(truth - chosen)),
            "nu": cand.nu,
            "p": cand.structure.p,
        }
    return out


@dataclass
class ExperimentResult:
    config: SimConfig
    metrics: dict[str, Metrics]
    per_replication: dict[str, list[dict[str, float]]]
    failures: int = 0

    def to_dict(self) -> dict:
        reps = {c: [{k: (format_nu(v) if k == "nu" else v) for k, v in r.items()} for r in rows]
                for c, rows in self.per_replication.items()}
        return {"config": self.config.to_dict(),
                "metrics": {c: m.as_dict() for c, m in self.metrics.items()},
                "per_replication": reps, "failures": self.failures}


def run_experiment(config: SimConfig, criteria: Sequence[Criterion | str] = ("mml", "bic", "aicc"),
                   dof_grid: Sequence[float] = default_grid(), em: EMConfig = EMConfig(),
                   workers: int = 1, max_failure_rate: float = 0.05) -> ExperimentResult:
    """Average the four metrics over replications for each criterion.

    Each replication owns an RNG substream keyed by its index; results are
    folded in replication order regardless of ``workers``.
    """
    crits = [Criterion.parse(c).value for c in criteria]
    reps = list(range(config.replications))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(run_replication, config, r, crits, dof_grid, em) for r in reps]
            outcomes = []
            for f in futures:
                try:
                    outcomes.append(f.result())
                except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
                    outcomes.append(exc)
    else:
        outcomes = []
        for r in reps:
            try:
                outcomes.append(run_replication(config, r, crits, dof_grid, em))
            except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
                outcomes.append(exc)
    failures = sum(isinstance(o, Exception) for o in outcomes)
    if failures > max_failure_rate * len(reps):
        raise RuntimeError(f"{failures} of {len(reps)} replications failed")
    if failures:
        log.warning("%d replications failed and were skipped", failures)
    rows = {c: [o[c] for o in outcomes if not isinstance(o, Exception)] for c in crits}
    metrics = {}
    keys = ("empirical_kl", "mae", "false_positives", "false_negatives")
    for c in crits:
        arr = np.array([[r[k] for k in keys] for r in rows[c]])
        mean = arr.mean(axis=0)
        se = arr.std(axis=0, ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else np.zeros(4)
        metrics[c] = Metrics(*map(float, mean), se=dict(zip(keys, map(float, se))))
    return ExperimentResult(config, metrics, rows, failures)


def table1_grid() -> list[tuple[str, str, str]]:
    """All 27 (true nu, sparsity, signal) cells."""
    return [(nu, sp, sg) for nu in ("1", "5", "inf") for sp in ("dense", "balanced", "sparse")
            for sg in ("weak", "moderate", "strong")]


# ---------------------------------------------------------------------------
# Boston cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CVResult:
    nus: tuple[float, ...]
    criteria: tuple[str, ...]
    nll: dict[str, np.ndarray]
    mae: dict[str, np.ndarray]
    selected_nu: dict[str, list[float]]

    def summary(self) -> dict:
        out = {}
        for c in self.criteria:
            counts = {format_nu(nu): sum(1 for s in self.selected_nu[c] if s == nu) / len(self.selected_nu[c])
                      for nu in self.nus}
            out[c] = {
                "nll": {format_nu(nu): float(self.nll[c][:, j].mean()) for j, nu in enumerate(self.nus)},
                "mae": {format_nu(nu): float(self.mae[c][:, j].mean()) for j, nu in enumerate(self.nus)},
                "nu_frequency": counts,
            }
        return out

    def to_dict(self) -> dict:
        return {"nus": [format_nu(n) for n in self.nus], "criteria": list(self.criteria),
                "summary": self.summary(),
                "per_split": {c: {"nll": self.nll[c].tolist(), "mae": self.mae[c].tolist(),
                                  "selected_nu": [format_nu(v) for v in self.selected_nu[c]]}
                              for c in self.criteria}}


def boston_cv(dataset: Dataset, splits: int = 50, rng: np.random.Generator | int = 0,
              criteria: Sequence[Criterion | str] = ("mml", "bic", "aicc"),
              dof_grid: Sequence[float] = default_grid(), scheme: Scheme | str = Scheme.ALL_SUBSETS,
              em: EMConfig = EMConfig(), workers: int = 1) -> CVResult:
    """Random half/half splits; per split and per nu, select on the training half.

    Test NLL is averaged per observation; MAE is the mean absolute error of
    the fitted location. The overall choice (across nu) is recorded to report
    how often each nu wins.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    crits = tuple(Criterion.parse(c).value for c in criteria)
    nus = tuple(dof_grid)
    n = dataset.n
    half = n // 2
    raw = dataset.X + dataset.means
    structures = list(enumerate_structures(dataset.q, scheme))
    nll = {c: np.zeros((splits, len(nus))) for c in crits}
    mae = {c: np.zeros((splits, len(nus))) for c in crits}
    chosen = {c: [] for c in crits}
    for s in range(splits):
        perm = rng.permutation(n)
        tr, te = np.sort(perm[:half]), np.sort(perm[half:2 * half])
        train = dataset.subset_rows(tr)
        Xte = train.center(raw[te])
        yte = dataset.y[te]
        table = score_table(train, structures, nus, scheme, em, crits, workers)
        for c in crits:
            S = table.scores(c)
            best_overall = (np.inf, None)
            for j, nu in enumerate(nus):
                col = S[:, j]
                if not np.any(np.isfinite(col)):
                    nll[c][s, j] = mae[c][s, j] = np.nan
                    continue
                i = min((i for i in range(len(col)) if np.isfinite(col[i])),
                        key=lambda i: (col[i], structures[i].p, structures[i].gamma))
                cand = table.candidate(c, i, j, col[i])
                g = list(cand.structure.gamma)
                mu = cand.params.beta0 + Xte[:, g] @ cand.params.beta
                nll[c][s, j] = -float(np.mean(t_logpdf(yte, mu, cand.params.tau, cand.nu)))
                mae[c][s, j] = float(np.mean(np.abs(yte - mu)))
                if col[i] < best_overall[0]:
                    best_overall = (col[i], nu)
            chosen[c].append(best_overall[1])
        log.info("split %d/%d done", s + 1, splits)
    return CVResult(nus, crits, nll, mae, chosen)
