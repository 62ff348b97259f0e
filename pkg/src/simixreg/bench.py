"""Replication harness, accuracy metrics and prediction-error evaluation.

Random streams: a master seed is expanded with ``numpy.random.SeedSequence``.
Replication ``r`` (or MCCV partition ``r``) uses child ``r`` of
``SeedSequence(seed).spawn(count)``; the child seeds data generation and its
first spawned grandchild seeds any estimator randomness. Results are keyed by
replication index, so aggregation does not depend on completion order.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, DegenerateWindowError, Grid, InvalidArgument, NumericalRankError, interp_rows
from .kernels import KernelSpec
from .linreg import MixLinRegFit, OlsFit, fit_mixlinreg
from .mrsip import MrsipFit, fit_mrsip
from .msim import EmControl, MsimFit, fit_msim_fib, fit_msim_os
from .simulate import TruthSpec, gen_example1, gen_example2
from .sir import sir_direction

log = logging.getLogger(__name__)

FIT_ERRORS = (DegenerateWindowError, NumericalRankError, InvalidArgument, FloatingPointError)
METRIC_TRIM = 0.05


# --------------------------------------------------------------------- metrics


def rase(est: np.ndarray, truth: np.ndarray) -> float:
    """Root average squared error over a grid, minimized over component relabelings.

    ``est`` and ``truth`` are k x N tables of one curve family on the same grid.
    """
    est = np.atleast_2d(np.asarray(est, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if est.shape != truth.shape:
        raise InvalidArgument("estimate and truth tables differ in shape")
    N = truth.shape[1]
    return min(
        math.sqrt(float(np.sum((est[list(p)] - truth) ** 2)) / N)
        for p in itertools.permutations(range(truth.shape[0]))
    )


def _rase_fixed(est, truth):
    return math.sqrt(float(np.sum((est - truth) ** 2)) / truth.shape[1])


def align_curves(est: dict, truth: dict) -> tuple[int, ...]:
    """Permutation of estimated labels minimizing the summed RASE over shared families."""
    k = truth["pi"].shape[0]
    fams = [f for f in ("pi", "m", "sigma2") if f in est and f in truth]
    return min(
        itertools.permutations(range(k)),
        key=lambda p: sum(_rase_fixed(est[f][list(p)], truth[f]) for f in fams),
    )


def mse_alpha(estimates, truth) -> np.ndarray:
    """Per-coordinate mean squared error of index estimates, times 100."""
    est = np.atleast_2d(np.asarray([np.asarray(a, dtype=float) for a in estimates]))
    return 100.0 * np.mean((est - np.asarray(truth, dtype=float)) ** 2, axis=0)


def metric_grid(ds: Dataset, truth: TruthSpec, N: int = 100, trim: float = METRIC_TRIM) -> Grid:
    """Evaluation grid over the central ``1 - 2*trim`` range of the true index."""
    z = ds.x @ truth.alpha.alpha
    lo, hi = np.quantile(z, [trim, 1 - trim])
    return Grid(np.linspace(lo, hi, N))


# ------------------------------------------------------------------ estimators


@dataclass
class TruthFit:
    """The true model dressed as a fit; used to sanity-check the metrics."""

    truth: TruthSpec
    grid: Grid

    @property
    def alpha(self):
        return self.truth.alpha


def _estimate_curves(fit, u: np.ndarray) -> dict[str, np.ndarray]:
    if isinstance(fit, MsimFit):
        c = fit.curves
        return {f: interp_rows(getattr(c, f), c.grid, u).T for f in ("pi", "m", "sigma2")}
    if isinstance(fit, MrsipFit):
        return {"pi": interp_rows(fit.pi_curve.pi, fit.pi_curve.grid, u).T}
    if isinstance(fit, MixLinRegFit):
        return {"pi": np.repeat(fit.pi[:, None], u.size, axis=1)}
    if isinstance(fit, TruthFit):
        return fit.truth.curves(u)
    return {}


def _params(fit):
    if isinstance(fit, (MrsipFit, MixLinRegFit)):
        return fit.params.beta, fit.params.sigma2
    if isinstance(fit, TruthFit) and fit.truth.beta is not None:
        return fit.truth.beta, fit.truth.beta_sigma2
    return None


def evaluate_fit(fit, truth: TruthSpec, grid: Grid) -> dict[str, float]:
    """Metrics for one fitted estimator against the truth, with labels aligned."""
    row: dict[str, float] = {}
    alpha = getattr(fit, "alpha", None)
    if alpha is not None:
        for j, a in enumerate(np.asarray(alpha, dtype=float)):
            row[f"alpha{j + 1}"] = float(a)
    u = grid.points
    est = _estimate_curves(fit, u)
    tru = truth.curves(u)
    params = _params(fit)
    if params is not None and truth.beta is not None:
        beta, s2 = params
        perm = min(
            itertools.permutations(range(truth.beta.shape[0])),
            key=lambda p: float(np.sum((beta[list(p)] - truth.beta) ** 2)),
        )
        beta, s2 = beta[list(perm)], s2[list(perm)]
        for j in range(beta.shape[0]):
            for c in range(beta.shape[1]):
                row[f"beta{j + 1}{c}"] = float(beta[j, c])
            row[f"sigma2_{j + 1}"] = float(s2[j])
    elif est:
        perm = align_curves(est, tru)
    else:
        perm = None
    for fam, table in est.items():
        row[f"rase_{fam}"] = _rase_fixed(table[list(perm)], tru[fam])
    return row


def _fib_true(ds, truth, h, seed, ctrl):
    return fit_msim_fib(ds, 2, KernelSpec(h=h), ctrl, init=truth.alpha, seed=seed)


def _mrsip_true(ds, truth, h, seed, ctrl):
    from .linreg import MrsipParams

    return fit_mrsip(
        ds, 2, KernelSpec(h=h), ctrl, init=(truth.alpha, MrsipParams(truth.beta, truth.beta_sigma2)), seed=seed
    )


@dataclass
class _SirFit:
    alpha: object


ESTIMATORS: dict[str, Callable] = {
    "SIR": lambda ds, truth, h, seed, ctrl: _SirFit(sir_direction(ds)),
    "OS": lambda ds, truth, h, seed, ctrl: fit_msim_os(ds, 2, KernelSpec(h=h), ctrl, seed),
    "FIB(S)": lambda ds, truth, h, seed, ctrl: fit_msim_fib(ds, 2, KernelSpec(h=h), ctrl, "sir", seed),
    "FIB(T)": _fib_true,
    "MRSIP(S)": lambda ds, truth, h, seed, ctrl: fit_mrsip(ds, 2, KernelSpec(h=h), ctrl, "sir", seed),
    "MRSIP(T)": _mrsip_true,
    "MixLinReg": lambda ds, truth, h, seed, ctrl: fit_mixlinreg(ds, 2, seed=seed),
    "TRUTH": lambda ds, truth, h, seed, ctrl: TruthFit(truth, Grid.spanning(ds.x @ truth.alpha.alpha)),
}
GENERATORS = {"example1": gen_example1, "example2": gen_example2}


# ---------------------------------------------------------------- replications


@dataclass
class ReplicationReport:
    example: str
    n: int
    reps: int
    seed: int
    rows: list[dict] = field(default_factory=list)
    failures: dict[str, int] = field(default_factory=dict)

    def estimator_rows(self, name: str) -> list[dict]:
        return [r for r in self.rows if r["estimator"] == name]

    def estimators(self) -> list[str]:
        return list(dict.fromkeys(r["estimator"] for r in self.rows))

    def aggregates(self, truth: TruthSpec | None = None) -> dict[str, dict[str, float]]:
        """Per-estimator summaries: MSE x 100 of parameters, mean and SD of each RASE."""
        if truth is None:
            truth = GENERATORS[self.example](2, 0)[1]
        out: dict[str, dict[str, float]] = {}
        for name in self.estimators():
            rows = self.estimator_rows(name)
            agg: dict[str, float] = {"count": float(len(rows)), "failures": float(self.failures.get(name, 0))}
            keys = [k for k in rows[0] if k not in ("rep", "estimator")]
            for key in keys:
                vals = np.array([r[key] for r in rows], dtype=float)
                if key.startswith("rase_"):
                    agg[f"mean_{key}"] = float(vals.mean())
                    agg[f"sd_{key}"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
                elif key.startswith("alpha"):
                    j = int(key[5:]) - 1
                    agg[f"mse100_{key}"] = float(100 * np.mean((vals - truth.alpha.alpha[j]) ** 2))
                elif key.startswith("beta") and truth.beta is not None:
                    j, c = int(key[4]) - 1, int(key[5:])
                    agg[f"mse100_{key}"] = float(100 * np.mean((vals - truth.beta[j, c]) ** 2))
                elif key.startswith("sigma2_") and truth.beta_sigma2 is not None:
                    j = int(key[7:]) - 1
                    agg[f"mse100_{key}"] = float(100 * np.mean((vals - truth.beta_sigma2[j]) ** 2))
            out[name] = agg
        return out


def _one_replication(args):
    example, n, r, child, estimators, bandwidths, ctrl = args
    ds, truth = GENERATORS[example](n, child)
    est_seed = int(child.spawn(1)[0].generate_state(1)[0])
    grid = metric_grid(ds, truth, ctrl.n_grid)
    rows, failed = [], []
    for name in estimators:
        try:
            fit = ESTIMATORS[name](ds, truth, bandwidths.get(name, bandwidths.get("*")), est_seed, ctrl)
            row = evaluate_fit(fit, truth, grid)
        except FIT_ERRORS as exc:
            log.warning("replication %d, %s failed: %s", r, name, exc)
            failed.append(name)
            continue
        if not all(np.isfinite(v) for v in row.values()):
            failed.append(name)
            continue
        rows.append({"rep": r, "estimator": name, **row})
    return r, rows, failed


def run_replications(
    example: str,
    n: int,
    reps: int,
    estimators=("SIR", "FIB(S)"),
    bandwidths: float | dict[str, float] = 0.1,
    seed: int = 0,
    ctrl: EmControl = EmControl(),
    workers: int = 1,
) -> ReplicationReport:
    """Independent seeded replications of data generation, fitting and scoring.

    ``bandwidths`` is one bandwidth for every estimator or a mapping from
    estimator name to bandwidth (key ``"*"`` is the fallback).
    """
    if example not in GENERATORS:
        raise InvalidArgument(f"unknown example {example!r}")
    unknown = [e for e in estimators if e not in ESTIMATORS]
    if unknown:
        raise InvalidArgument(f"unknown estimators {unknown}")
    if not isinstance(bandwidths, dict):
        bandwidths = {"*": float(bandwidths)}
    children = np.random.SeedSequence(seed).spawn(reps)
    tasks = [(example, n, r, children[r], tuple(estimators), bandwidths, ctrl) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_replication, tasks))
    else:
        results = [_one_replication(t) for t in tasks]
    report = ReplicationReport(example, n, reps, seed)
    for _, rows, failed in sorted(results, key=lambda t: t[0]):
        report.rows.extend(rows)
        for name in failed:
            report.failures[name] = report.failures.get(name, 0) + 1
    return report


# ------------------------------------------------------------ prediction error


def predictor_factories(k: int = 2, h: float = 0.1, ctrl: EmControl = EmControl()):
    """Standard estimators for prediction comparisons: name -> ``fit(train) -> model``."""
    kern = KernelSpec(h=h)
    return {
        "MSIM": lambda ds: fit_msim_fib(ds, k, kern, ctrl),
        "MRSIP": lambda ds: fit_mrsip(ds, k, kern, ctrl),
        "MixLinReg": lambda ds: fit_mixlinreg(ds, k),
        "OLS": OlsFit.fit,
    }


def _splits(n: int, d: int, n_partitions: int, seed, mode: str):
    children = np.random.SeedSequence(seed).spawn(n_partitions)
    if mode == "mccv":
        for child in children:
            perm = np.random.default_rng(child).permutation(n)
            yield perm[d:], perm[:d]
    elif mode == "kfold":
        for child in children:
            perm = np.random.default_rng(child).permutation(n)
            for test in np.array_split(perm, d):
                yield np.setdiff1d(perm, test), np.sort(test)
    else:
        raise InvalidArgument(f"unknown evaluation mode {mode!r}")


def mccv_evaluate(
    ds: Dataset,
    d: int,
    n_partitions: int,
    estimators: dict[str, Callable],
    seed=0,
    mode: str = "mccv",
) -> dict[str, np.ndarray]:
    """Mean squared prediction error per partition for each estimator.

    ``mode="mccv"`` draws ``n_partitions`` random splits with ``d`` test rows;
    ``mode="kfold"`` runs ``n_partitions`` repeats of ``d``-fold CV and records
    one error per fold. Mixture models predict with classification-weighted
    component means; failed fits record NaN.
    """
    if mode == "mccv" and not 0 < d < ds.n:
        raise InvalidArgument("test size d must satisfy 0 < d < n")
    if mode == "kfold" and not 2 <= d <= ds.n:
        raise InvalidArgument("fold count must satisfy 2 <= d <= n")
    errors: dict[str, list[float]] = {name: [] for name in estimators}
    for train, test in _splits(ds.n, d, n_partitions, seed, mode):
        tr, te = ds.subset(train), ds.subset(test)
        for name, factory in estimators.items():
            try:
                pred = factory(tr).predict(te)
                errors[name].append(float(np.mean((te.y - pred) ** 2)))
            except FIT_ERRORS as exc:
                log.warning("%s failed on a partition: %s", name, exc)
                errors[name].append(float("nan"))
    return {name: np.array(v) for name, v in errors.items()}
