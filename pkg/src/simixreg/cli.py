"""Command-line front end: ``simixreg {fit,select-bandwidth,simulate,evaluate}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bench
from .bandwidth import ConfigurationError, CvConfig, select_bandwidth
from .core import DegenerateWindowError, InvalidArgument, NumericalRankError
from .io import DataFileError, curve_table, load_csv, write_summary, write_table
from .kernels import FAMILIES, KernelSpec
from .mrsip import fit_mrsip
from .msim import EmControl, fit_msim_fib, fit_msim_os

log = logging.getLogger(__name__)

EXIT_CODES = {
    DataFileError: 3,
    InvalidArgument: 2,
    DegenerateWindowError: 4,
    NumericalRankError: 5,
    ConfigurationError: 6,
}


@dataclass
class RunConfig:
    command: str
    output: Path
    input: Path | None = None
    response: str | None = None
    model: str = "msim"
    estimator: str = "fib"
    k: int = 2
    kernel: str = "epanechnikov"
    bandwidth: float | str = "cv"
    grid: int = 100
    seed: int = 0
    standardize: bool = False
    workers: int = 1
    folds: int = 10
    repeats: int = 30
    example: str = "example1"
    n: int = 400
    reps: int = 100
    estimators: list[str] = field(default_factory=list)
    mode: str = "mccv"
    d: int = 10
    partitions: int = 500
    ctrl: EmControl = field(default_factory=EmControl)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument("k must be at least 1")
        if self.bandwidth != "cv":
            try:
                self.bandwidth = float(self.bandwidth)
            except ValueError:
                raise InvalidArgument(f"bandwidth must be a number or 'cv', got {self.bandwidth!r}")
            if not self.bandwidth > 0:
                raise InvalidArgument("bandwidth must be positive")
        for name in ("grid", "workers", "folds", "repeats", "n", "reps", "d", "partitions"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be positive")


@dataclass
class FitReport:
    """Key-value summary plus named CSV tables (file stem -> (columns, rows))."""

    summary: dict
    tables: dict[str, tuple[list[str], list]] = field(default_factory=dict)

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        write_summary(out / "summary.txt", self.summary)
        for name, (cols, rows) in self.tables.items():
            write_table(out / f"{name}.csv", cols, rows)


def _cv(ds, cfg: RunConfig, report: FitReport):
    cv_cfg = CvConfig(folds=cfg.folds, repeats=cfg.repeats, model=cfg.model, k=cfg.k, kernel=cfg.kernel)
    sel = select_bandwidth(ds, cv_cfg, cfg.ctrl, seed=cfg.seed)
    rows = [(h, sel.table[float(h)], int(np.sum(sel.winners == h))) for h in sel.candidates]
    report.tables["cv"] = (["bandwidth", "mean_cv", "times_selected"], rows)
    report.summary["h_hat"] = sel.h_hat
    report.summary["operating_bandwidths"] = list(sel.operating)
    return sel


def cmd_fit(cfg: RunConfig) -> FitReport:
    ds = load_csv(cfg.input, cfg.response, cfg.standardize)
    report = FitReport({"command": "fit", "model": cfg.model, "estimator": cfg.estimator, "n": ds.n, "p": ds.p,
                        "k": cfg.k, "kernel": cfg.kernel, "standardized": cfg.standardize, "seed": cfg.seed})
    h = cfg.bandwidth
    if h == "cv":
        h = _cv(ds, cfg, report).h_hat
    report.summary["bandwidth"] = h
    kern = KernelSpec(cfg.kernel, h)
    if cfg.model == "msim":
        if cfg.estimator == "os":
            fit = fit_msim_os(ds, cfg.k, kern, cfg.ctrl, cfg.seed)
        else:
            fit = fit_msim_fib(ds, cfg.k, kern, cfg.ctrl, seed=cfg.seed)
        curves = fit.curves
    else:
        fit = fit_mrsip(ds, cfg.k, kern, cfg.ctrl, seed=cfg.seed)
        curves = fit.pi_curve
        cols = ["component", "intercept", *ds.column_names, "sigma2"]
        rows = [[j + 1, *fit.params.beta[j], fit.params.sigma2[j]] for j in range(fit.k)]
        report.tables["params"] = (cols, rows)
    report.summary.update({
        "alpha": list(fit.alpha.alpha),
        "alpha_columns": list(ds.column_names),
        "alpha_sign_convention": "unit norm, first nonzero entry positive",
        "loglik": fit.loglik,
        "converged": fit.converged,
        "outer_iterations": fit.n_outer_iters,
    })
    report.tables["curves"] = curve_table(curves)
    report.tables["trace"] = (["iteration", "loglik"], list(enumerate(fit.loglik_trace)))
    return report


def cmd_select_bandwidth(cfg: RunConfig) -> FitReport:
    ds = load_csv(cfg.input, cfg.response, cfg.standardize)
    report = FitReport({"command": "select-bandwidth", "model": cfg.model, "n": ds.n, "k": cfg.k,
                        "kernel": cfg.kernel, "standardized": cfg.standardize, "folds": cfg.folds,
                        "repeats": cfg.repeats, "seed": cfg.seed})
    sel = _cv(ds, cfg, report)
    report.summary["winners"] = list(sel.winners)
    return report


def cmd_simulate(cfg: RunConfig) -> FitReport:
    default = ["SIR", "OS", "FIB(S)"] if cfg.example == "example1" else ["MRSIP(S)", "MixLinReg"]
    estimators = cfg.estimators or default
    h = 0.1 if cfg.bandwidth == "cv" else cfg.bandwidth
    rep = bench.run_replications(cfg.example, cfg.n, cfg.reps, estimators, h, cfg.seed, cfg.ctrl, cfg.workers)
    report = FitReport({"command": "simulate", "example": cfg.example, "n": cfg.n, "reps": cfg.reps,
                        "estimators": estimators, "bandwidth": h, "seed": cfg.seed,
                        "replication_rows": len(rep.rows)})
    cols = list(dict.fromkeys(k for row in rep.rows for k in row))
    report.tables["replications"] = (cols, [[row.get(c, "") for c in cols] for row in rep.rows])
    for name, agg in rep.aggregates().items():
        for key, value in agg.items():
            report.summary[f"{name}.{key}"] = value
    return report


def cmd_evaluate(cfg: RunConfig) -> FitReport:
    ds = load_csv(cfg.input, cfg.response, cfg.standardize)
    report = FitReport({"command": "evaluate", "mode": cfg.mode, "d": cfg.d, "partitions": cfg.partitions,
                        "k": cfg.k, "standardized": cfg.standardize, "seed": cfg.seed})
    h = cfg.bandwidth
    if h == "cv":
        h = _cv(ds, cfg, report).h_hat
    report.summary["bandwidth"] = h
    factories = bench.predictor_factories(cfg.k, h, cfg.ctrl)
    names = cfg.estimators or list(factories)
    unknown = [n for n in names if n not in factories]
    if unknown:
        raise InvalidArgument(f"unknown estimators {unknown}; choose from {list(factories)}")
    errs = bench.mccv_evaluate(ds, cfg.d, cfg.partitions, {n: factories[n] for n in names}, cfg.seed, cfg.mode)
    length = len(errs[names[0]])
    report.tables["errors"] = (["partition", *names], [[i, *(errs[n][i] for n in names)] for i in range(length)])
    for n in names:
        report.summary[f"{n}.mean_mspe"] = float(np.nanmean(errs[n]))
        report.summary[f"{n}.median_mspe"] = float(np.nanmedian(errs[n]))
        report.summary[f"{n}.failures"] = int(np.isnan(errs[n]).sum())
    return report


COMMANDS = {
    "fit": cmd_fit,
    "select-bandwidth": cmd_select_bandwidth,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
}


def run(cfg: RunConfig) -> FitReport:
    """Execute one subcommand and write ``summary.txt`` plus its CSV tables to ``cfg.output``."""
    if cfg.command not in COMMANDS:
        raise InvalidArgument(f"unknown command {cfg.command!r}")
    if cfg.command != "simulate" and cfg.input is None:
        raise InvalidArgument(f"{cfg.command} needs an input file")
    report = COMMANDS[cfg.command](cfg)
    report.write(cfg.output)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simixreg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--k", type=int, default=2, help="number of components")
        p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
        p.add_argument("--grid", type=int, default=100, help="grid size N")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--max-em-iters", type=int, default=500)
        p.add_argument("--max-outer-iters", type=int, default=50)
        if data:
            p.add_argument("input", type=Path, help="CSV file with a header row")
            p.add_argument("--response", help="response column (default: last column)")
            p.add_argument("--standardize", action="store_true", help="divide every column by its SD")
            p.add_argument("--model", choices=("msim", "mrsip"), default="msim")
            p.add_argument("--folds", type=int, default=10)
            p.add_argument("--repeats", type=int, default=30)

    p = sub.add_parser("fit", help="fit MSIM or MRSIP to a CSV dataset")
    common(p)
    p.add_argument("--bandwidth", default="cv", help="bandwidth or 'cv'")
    p.add_argument("--estimator", choices=("fib", "os"), default="fib", help="MSIM estimator")

    p = sub.add_parser("select-bandwidth", help="cross-validated bandwidth only")
    common(p)

    p = sub.add_parser("simulate", help="replicate a simulation design")
    common(p, data=False)
    p.add_argument("--example", choices=tuple(bench.GENERATORS), default="example1")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--bandwidth", default="0.1")
    p.add_argument("--estimators", type=lambda s: s.split(","), default=[],
                   help=f"comma list from {sorted(bench.ESTIMATORS)}")

    p = sub.add_parser("evaluate", help="prediction error by Monte-Carlo or d-fold CV")
    common(p)
    p.add_argument("--bandwidth", default="cv")
    p.add_argument("--mode", choices=("mccv", "kfold"), default="mccv")
    p.add_argument("--d", type=int, default=10, help="test size (mccv) or fold count (kfold)")
    p.add_argument("--partitions", type=int, default=500)
    p.add_argument("--estimators", type=lambda s: s.split(","), default=[],
                   help="comma list from MSIM,MRSIP,MixLinReg,OLS")
    return parser


def _config(ns: argparse.Namespace) -> RunConfig:
    ctrl = EmControl(max_em_iters=ns.max_em_iters, max_outer_iters=ns.max_outer_iters, n_grid=ns.grid)
    keys = set(RunConfig.__dataclass_fields__) - {"ctrl"}
    return RunConfig(ctrl=ctrl, **{k: v for k, v in vars(ns).items() if k in keys})


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ns = build_parser().parse_args(argv)
    try:
        report = run(_config(ns))
    except tuple(EXIT_CODES) as exc:
        code = next(c for cls, c in EXIT_CODES.items() if isinstance(exc, cls))
        tb = traceback.extract_tb(exc.__traceback__)
        record = {
            "error": type(exc).__name__,
            "module": Path(tb[-1].filename).stem if tb else type(exc).__module__,
            "message": str(exc),
            "exit_code": code,
        }
        print(json.dumps(record), file=sys.stderr)
        return code
    print(f"wrote {ns.output}/summary.txt ({len(report.summary)} entries)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
