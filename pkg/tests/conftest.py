import numpy as np
import pytest

from tmml.core import Dataset

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Collect one pass/fail line per acceptance criterion."""
    def _rec(label: str, ok: bool, detail: str):
        _ACCEPTANCE.append((label, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok
    return _rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")


def make_dataset(n=60, q=4, seed=0, support=(0, 2), signal=1.5, nu=5.0, tau=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, q))
    beta = np.zeros(q)
    beta[list(support)] = signal
    noise = rng.standard_normal(n) * np.sqrt(tau)
    if np.isfinite(nu):
        noise /= np.sqrt(rng.gamma(nu / 2, 2 / nu, n))
    return Dataset.from_arrays(X, 1.0 + X @ beta + noise)


@pytest.fixture
def small():
    return make_dataset()
