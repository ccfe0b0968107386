"""Command line interface: fit | select | posterior | simulate | boston-cv."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .codelength import SingularDesignError
from .core import DataError, Dataset, ModelStructure, Scheme, load_boston, load_dataset
from .criteria import Criterion
from .distributions import build_dof_grid, default_grid, format_nu, parse_nu
from .estimation import EMConfig, FitError, mml_fit, ml_fit
from .search import default_workers, enumerate_structures, report_from_table, score_table
from .simulation import SIGNAL, SPARSITY, TRUE_NU, SimConfig, boston_cv, run_experiment, table1_grid

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.4f}"


def _grid(m: int) -> tuple[float, ...]:
    if m == 4:
        return default_grid()
    if m < 2:
        raise UsageError("--dof-grid must be at least 2")
    return build_dof_grid(m).values


def _dataset(args) -> Dataset:
    if args.data is None:
        return load_boston()
    if not args.target:
        raise UsageError("--target is required with --data")
    return load_dataset(args.data, args.target)


def _columns(ds: Dataset, text: str) -> ModelStructure:
    text = text.strip()
    if text.lower() == "all":
        return ModelStructure(tuple(range(ds.q)))
    if text == "" or text.lower() == "none":
        return ModelStructure(())
    names = [c.strip() for c in text.split(",") if c.strip()]
    return ModelStructure(ds.index_of(names))


def _emit(doc: dict, text: str, out: str | None):
    if out:
        Path(out).write_text(json.dumps(doc, indent=2))
    print(text)


# --- renderers work on the JSON documents so saved output re-renders identically

def render_fit(doc: dict) -> str:
    lines = [f"structure: {', '.join(doc['predictors']) or '(intercept only)'}",
             f"nu: {doc['nu']}  method: {doc['method']}  iterations: {doc['iterations']}  "
             f"converged: {doc['converged']}",
             f"beta0: {_fmt(doc['beta0'])}  tau: {_fmt(doc['tau'])}  K: {_fmt(doc['K'])}"]
    for name, b in zip(doc["predictors"], doc["beta"]):
        lines.append(f"  {name:>12s} {_fmt(b)}")
    if doc.get("codelength"):
        lines.append("codelength (nits): " + "  ".join(f"{k}={_fmt(v)}" for k, v in doc["codelength"].items()))
    return "\n".join(lines)


def render_select(doc: dict) -> str:
    lines = [f"criterion: {doc['criterion']}",
             f"{'rank':>4s}  {'p':>3s}  {'nu':>5s}  {'score':>12s}  predictors"]
    for r, c in enumerate(doc["ranked"], start=1):
        lines.append(f"{r:4d}  {c['p']:3d}  {c['nu']:>5s}  {_fmt(c['score']):>12s}  {','.join(c['predictors'])}")
    return "\n".join(lines)


def render_posterior(doc: dict) -> str:
    lines = [f"{'predictor':>12s}  marginal"]
    for name, v in doc["marginal_inclusion"]:
        lines.append(f"{name:>12s}  {v:.3f}")
    return "\n".join(lines)


def render_simulate(doc: dict) -> str:
    lines = [f"{'d.f.':>5s} {'sparsity':>9s} {'signal':>8s} {'crit':>5s} {'KL':>8s} {'MAE':>8s} {'FP':>6s} {'FN':>6s}"]
    for cell in doc["cells"]:
        cfg = cell["config"]
        for c, m in cell["metrics"].items():
            lines.append(f"{cfg['true_nu']:>5s} {cell['sparsity']:>9s} {cell['signal']:>8s} {c:>5s} "
                         f"{_fmt(m['empirical_kl']):>8s} {_fmt(m['mae']):>8s} "
                         f"{m['false_positives']:6.2f} {m['false_negatives']:6.2f}")
    return "\n".join(lines)


def render_cv(doc: dict) -> str:
    nus = doc["nus"]
    lines = [f"{'':6s}{'':6s}" + "".join(f"{'t(' + n + ')':>10s}" for n in nus)]
    for c in doc["criteria"]:
        s = doc["summary"][c]
        lines.append(f"{c:6s}{'NLL':6s}" + "".join(f"{_fmt(s['nll'][n]):>10s}" for n in nus))
        lines.append(f"{'':6s}{'MAE':6s}" + "".join(f"{_fmt(s['mae'][n]):>10s}" for n in nus))
        lines.append(f"{'':6s}{'freq':6s}" + "".join(f"{s['nu_frequency'][n]:>10.2f}" for n in nus))
    return "\n".join(lines)


RENDERERS = {"fit": render_fit, "select": render_select, "posterior": render_posterior,
             "simulate": render_simulate, "boston-cv": render_cv}


def render(doc: dict) -> str:
    return RENDERERS[doc["command"]](doc)


# --- subcommands

def cmd_fit(args) -> dict:
    ds = _dataset(args)
    st = _columns(ds, args.columns)
    nu = parse_nu(args.nu)
    cfg = EMConfig(args.max_iter, args.tol)
    if args.method == "mml":
        res = mml_fit(ds, st, nu, cfg, Scheme.parse(args.scheme))
    else:
        res = ml_fit(ds, st, nu, cfg)
    p = res.params
    return {"command": "fit", "method": args.method, "nu": format_nu(nu),
            "predictors": st.labels(ds.names), "gamma": list(st.gamma),
            "beta0": p.beta0, "beta": p.beta.tolist(), "tau": p.tau, "K": res.K.k_value,
            "objective": res.objective, "iterations": res.iterations, "converged": res.converged,
            "codelength": res.breakdown.as_dict() if res.breakdown is not None else None}


def _table(args, ds, scheme, crit):
    structures = list(enumerate_structures(ds.q, scheme))
    return score_table(ds, structures, _grid(args.dof_grid), scheme,
                       EMConfig(args.max_iter, args.tol), (crit,), args.workers)


def cmd_select(args) -> dict:
    ds = _dataset(args)
    scheme = Scheme.parse(args.scheme)
    crit = Criterion.parse(args.criterion)
    report = report_from_table(_table(args, ds, scheme, crit), crit)
    doc = report.to_dict(top=args.top)
    doc["command"] = "select"
    doc["scheme"] = scheme.value
    return doc


def cmd_posterior(args) -> dict:
    ds = _dataset(args)
    report = report_from_table(_table(args, ds, Scheme.ALL_SUBSETS, Criterion.MML), Criterion.MML)
    marg = sorted(zip(ds.names, report.marginal_inclusion.tolist()), key=lambda t: (t[1], t[0]))
    return {"command": "posterior", "best": report.best.as_dict(ds.names),
            "marginal_inclusion": [list(m) for m in marg],
            "structures": [list(s.gamma) for s in report.structures],
            "posteriors": report.posteriors.tolist()}


def cmd_simulate(args) -> dict:
    if args.all_cells:
        cells = table1_grid()
    else:
        cells = [(args.true_nu, args.sparsity, args.signal)]
    crits = [c.strip() for c in args.criteria.split(",")]
    out = []
    for nu, sp, sg in cells:
        cfg = SimConfig.named(nu, sp, sg, replications=args.replications, seed=args.seed)
        res = run_experiment(cfg, crits, _grid(args.dof_grid), EMConfig(args.max_iter, args.tol), args.workers)
        d = res.to_dict()
        d.pop("per_replication")
        d.update(sparsity=sp, signal=sg)
        out.append(d)
    return {"command": "simulate", "cells": out}


def cmd_boston_cv(args) -> dict:
    ds = _dataset(args)
    crits = [c.strip() for c in args.criteria.split(",")]
    res = boston_cv(ds, args.splits, np.random.default_rng(args.seed), crits, _grid(args.dof_grid),
                    Scheme.parse(args.scheme), EMConfig(args.max_iter, args.tol), args.workers)
    doc = res.to_dict()
    doc["command"] = "boston-cv"
    return doc


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "posterior": cmd_posterior,
            "simulate": cmd_simulate, "boston-cv": cmd_boston_cv}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help="CSV file with a header row (default: bundled Boston housing)")
    common.add_argument("--target", help="response column name")
    common.add_argument("--scheme", default="subsets", choices=["nested", "subsets"])
    common.add_argument("--dof-grid", type=int, default=4, metavar="M",
                        help="number of nu candidates (4 gives 1, 1.9, 5, inf)")
    common.add_argument("--criterion", default="mml", choices=[c.value for c in Criterion])
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the JSON report here")
    common.add_argument("--workers", type=int, default=default_workers())
    common.add_argument("--max-iter", type=int, default=500)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tmml", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit one structure")
    p.add_argument("--columns", default="all", help="comma-separated predictor names, 'all' or 'none'")
    p.add_argument("--nu", default="1.9", help="degrees of freedom ('inf' for Gaussian)")
    p.add_argument("--method", default="mml", choices=["mml", "ml"])

    p = sub.add_parser("select", parents=[common], help="rank structures x dof")
    p.add_argument("--top", type=int, default=20)

    sub.add_parser("posterior", parents=[common], help="model posteriors and marginal inclusion")

    p = sub.add_parser("simulate", parents=[common], help="synthetic comparison of criteria")
    p.add_argument("--true-nu", default="5", choices=list(TRUE_NU))
    p.add_argument("--sparsity", default="sparse", choices=list(SPARSITY))
    p.add_argument("--signal", default="strong", choices=list(SIGNAL))
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--criteria", default="mml,bic,aicc")
    p.add_argument("--all-cells", action="store_true", help="run all 27 configurations")

    p = sub.add_parser("boston-cv", parents=[common], help="half/half cross-validation")
    p.add_argument("--splits", type=int, default=50)
    p.add_argument("--criteria", default="mml,bic,aicc")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        args.workers = 1
    try:
        doc = COMMANDS[args.command](args)
    except (UsageError, DataError, IndexError) as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except (FitError, SingularDesignError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(json.dumps({"error": "numerical", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    _emit(doc, render(doc), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
