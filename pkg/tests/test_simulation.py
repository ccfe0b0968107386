import math

import numpy as np
import pytest

from tmml.core import load_boston
from tmml.distributions import TSpec
from tmml.simulation import (SimConfig, boston_cv, empirical_kl, generate_design, replication_rng,
                             run_experiment, run_replication, table1_grid)


def test_config_labels():
    cfg = SimConfig.named("inf", "balanced", "weak")
    assert (cfg.support_size, cfg.signal, cfg.true_nu) == (8, 0.5, math.inf)
    assert SimConfig.named("5", "dense", "strong").support() == tuple(range(15))
    assert len(SimConfig(support_size=3).support()) == 3
    assert len(table1_grid()) == 27
    with pytest.raises(ValueError):
        SimConfig(support_size=20)
    with pytest.raises(ValueError):
        SimConfig(rho=1.0)


def test_design_covariance():
    X = generate_design(200_000, 4, 0.5, np.random.default_rng(0))
    C = np.cov(X.T)
    expect = 0.5 ** np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
    np.testing.assert_allclose(C, expect, atol=0.01)


def test_empirical_kl_zero_at_truth():
    y = np.random.default_rng(0).standard_normal(100)
    mu = np.zeros(100)
    assert empirical_kl(y, mu, TSpec(0, 1, 5), mu, 1.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        empirical_kl(y, mu[:3], TSpec(0, 1, 5), mu, 1.0, 5.0)


def test_replication_reproducible():
    cfg = SimConfig(replications=2, n_test=500)
    a = run_replication(cfg, 1, ["mml", "bic"])
    b = run_replication(cfg, 1, ["mml", "bic"])
    assert a == b
    assert replication_rng(0, 1).random() != replication_rng(0, 2).random()
    for m in a.values():
        assert m["false_positives"] + m["false_negatives"] <= cfg.q


def test_serial_equals_parallel():
    cfg = SimConfig(replications=4, n_test=500, seed=3)
    s = run_experiment(cfg, ["mml", "aicc"], workers=1)
    p = run_experiment(cfg, ["mml", "aicc"], workers=2)
    assert s.to_dict() == p.to_dict()
    d = s.to_dict()
    assert set(d["metrics"]) == {"mml", "aicc"}
    assert len(d["per_replication"]["mml"]) == 4


def test_boston_cv_small():
    res = boston_cv(load_boston(), splits=2, rng=0, criteria=["mml", "bic"], scheme="nested")
    s = res.summary()
    assert set(s) == {"mml", "bic"}
    assert all(np.isfinite(v) for v in s["mml"]["nll"].values())
    assert sum(s["mml"]["nu_frequency"].values()) == pytest.approx(1.0)
    again = boston_cv(load_boston(), splits=2, rng=0, criteria=["mml", "bic"], scheme="nested")
    assert again.to_dict() == res.to_dict()
