"""Shared domain types, CSV ingestion and column centering."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


class Scheme(str, enum.Enum):
    """How the candidate set of structures is organised (and coded)."""

    NESTED = "nested"
    ALL_SUBSETS = "subsets"

    @classmethod
    def parse(cls, value: "Scheme | str") -> "Scheme":
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("-", "_")
        aliases = {"nested": cls.NESTED, "subsets": cls.ALL_SUBSETS,
                   "all_subsets": cls.ALL_SUBSETS, "allsubsets": cls.ALL_SUBSETS}
        try:
            return aliases[v]
        except KeyError:
            raise ValueError(f"unknown scheme {value!r}; expected 'nested' or 'subsets'") from None


class DataError(ValueError):
    """Raised when input data cannot be ingested."""


@dataclass(frozen=True)
class Dataset:
    """Response plus centred predictor matrix.

    ``X`` holds the predictors with column means removed; ``means`` keeps the
    subtracted means so models can predict on raw, uncentred rows.
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]
    means: np.ndarray
    target: str = "y"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError(f"shape mismatch: X{X.shape} vs y{y.shape}")
        if len(self.names) != X.shape[1]:
            raise DataError("one name per predictor column is required")
        if y.shape[0] < 3:
            raise DataError(f"need at least 3 observations, got {y.shape[0]}")
        y.setflags(write=False)
        X.setflags(write=False)
        means = np.asarray(self.means, dtype=float)
        means.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, X, y, names: Sequence[str] | None = None, target: str = "y") -> "Dataset":
        """Centre the columns of ``X`` and wrap them with ``y``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float).ravel()
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("non-finite values in data")
        if names is None:
            names = [f"x{j + 1}" for j in range(X.shape[1])]
        means = X.mean(axis=0) if X.shape[1] else np.zeros(0)
        return cls(y=y, X=X - means, names=tuple(names), means=means, target=target)

    def index_of(self, names: Iterable[str]) -> tuple[int, ...]:
        lookup = {name: j for j, name in enumerate(self.names)}
        out = []
        for name in names:
            if name not in lookup:
                raise DataError(f"unknown column {name!r}")
            out.append(lookup[name])
        return tuple(out)

    def center(self, X_raw) -> np.ndarray:
        """Apply the training column means to new raw rows."""
        return np.asarray(X_raw, dtype=float) - self.means

    def subset_rows(self, rows) -> "Dataset":
        """Re-centre a row subset (used for train/test splits)."""
        raw = self.X[rows] + self.means
        return Dataset.from_arrays(raw, self.y[rows], self.names, self.target)


@dataclass(frozen=True, order=True)
class ModelStructure:
    """Sorted, duplicate-free 0-based predictor indices."""

    gamma: tuple[int, ...] = ()
    scheme: Scheme = field(default=Scheme.ALL_SUBSETS, compare=False)

    def __post_init__(self):
        g = tuple(sorted(int(j) for j in self.gamma))
        if len(set(g)) != len(g):
            raise ValueError(f"duplicate indices in {self.gamma}")
        if g and g[0] < 0:
            raise ValueError("indices must be non-negative")
        if self.scheme is Scheme.NESTED and g != tuple(range(len(g))):
            raise ValueError(f"nested structure must be a prefix, got {g}")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))

    @property
    def p(self) -> int:
        return len(self.gamma)

    def labels(self, names: Sequence[str]) -> list[str]:
        return [names[j] for j in self.gamma]


@dataclass(frozen=True)
class TParams:
    """Fitted Student-t regression parameters; ``nu = inf`` is the Gaussian model."""

    beta0: float
    beta: np.ndarray
    tau: float
    nu: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).ravel())

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def mean(self, Xs: np.ndarray) -> np.ndarray:
        return self.beta0 + Xs @ self.beta if self.p else np.full(Xs.shape[0], self.beta0)


@dataclass(frozen=True)
class CodelengthBreakdown:
    """Message length components in nits."""

    assertion_beta: float
    assertion_scale: float
    detail: float
    hyper_k: float
    structure: float

    @property
    def total(self) -> float:
        return (self.assertion_beta + self.assertion_scale + self.detail
                + self.hyper_k + self.structure)

    def as_dict(self) -> dict[str, float]:
        return {"assertion_beta": self.assertion_beta,
                "assertion_scale": self.assertion_scale,
                "detail": self.detail, "hyper_k": self.hyper_k,
                "structure": self.structure, "total": self.total}


def load_dataset(path: str | Path, target: str) -> Dataset:
    """Read a header-row CSV; ``target`` becomes ``y``, the rest predictors.

    Rows with missing cells are rejected rather than imputed.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if target not in header:
        raise DataError(f"target column {target!r} not in {header}")
    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"line {i}: expected {len(header)} cells, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise DataError(f"line {i}, column {header[j]!r}: non-numeric cell {cell!r}") from None
    if not np.all(np.isfinite(values)):
        raise DataError("missing or non-finite values present")
    t = header.index(target)
    names = [h for j, h in enumerate(header) if j != t]
    X = np.delete(values, t, axis=1)
    return Dataset.from_arrays(X, values[:, t], names, target=target)


def boston_path() -> Path:
    return Path(str(resources.files("tmml") / "data" / "boston.csv"))


def load_boston() -> Dataset:
    """The bundled Boston housing data (506 rows, 13 predictors, target ``medv``)."""
    return load_dataset(boston_path(), "medv")


def submatrix(dataset: Dataset, structure: ModelStructure) -> np.ndarray:
    """Columns of the centred design selected by ``structure`` (n x p)."""
    g = structure.gamma
    if g and g[-1] >= dataset.q:
        raise IndexError(f"predictor index {g[-1]} out of range for q={dataset.q}")
    return dataset.X[:, list(g)]
