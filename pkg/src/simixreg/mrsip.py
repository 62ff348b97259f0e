"""Linear mixture components with proportions that vary smoothly over a single index."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CurveSet,
    Dataset,
    Grid,
    IndexVector,
    InvalidArgument,
    Responsibilities,
    interp_rows,
    log_normal_pdf,
    mixture_loglik,
    normalize_index,
    posterior,
    project,
)
from .kernels import KernelSpec, local_proportions, weight_matrix
from .linreg import MrsipParams, fit_mixlinreg, mrsip_update_beta_sigma
from .msim import EmControl, maximize_on_sphere
from .sir import SirConfig, sir_direction

log = logging.getLogger(__name__)

__all__ = [
    "MrsipFit",
    "MrsipParams",
    "fit_mrsip",
    "maximize_index_mrsip",
    "mrsip_e_step",
    "mrsip_loglik",
    "mrsip_update_beta_sigma",
    "mrsip_update_pi",
]

INNER_TOL = 1e-8
MAX_INNER = 100


@dataclass
class MrsipFit:
    alpha: IndexVector
    params: MrsipParams
    pi_curve: CurveSet
    loglik: float
    converged: bool = False
    n_outer_iters: int = 0
    loglik_trace: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.params.k

    def component_means(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.params.means(np.column_stack([np.ones(len(x)), x]))

    def classify(self, ds: Dataset) -> Responsibilities:
        return mrsip_e_step(ds, self.alpha, self.pi_curve, self.params)

    def predict(self, ds: Dataset) -> np.ndarray:
        return np.sum(self.classify(ds).p * self.component_means(ds.x), axis=1)


def _log_terms(ds: Dataset, alpha, pi_curve: CurveSet, params: MrsipParams):
    z = project(ds, alpha)
    with np.errstate(divide="ignore"):
        log_pi = np.log(interp_rows(pi_curve.pi, pi_curve.grid, z))
    mu = params.means(ds.design())
    return log_pi, log_normal_pdf(ds.y[:, None], mu, params.sigma2[None, :])


def mrsip_loglik(ds: Dataset, alpha, pi_curve: CurveSet, params: MrsipParams) -> float:
    return mixture_loglik(*_log_terms(ds, alpha, pi_curve, params))


def mrsip_e_step(ds: Dataset, alpha, pi_curve: CurveSet, params: MrsipParams) -> Responsibilities:
    p, _, bad = posterior(*_log_terms(ds, alpha, pi_curve, params))
    if bad:
        log.warning("%d rows underflowed in every component; assigned uniformly", bad)
    return Responsibilities(p)


def mrsip_update_pi(
    ds: Dataset,
    alpha,
    resp: Responsibilities,
    kernel: KernelSpec,
    grid: Grid,
    ctrl: EmControl = EmControl(),
) -> CurveSet:
    W = weight_matrix(kernel, project(ds, alpha), grid.points)
    return CurveSet(local_proportions(W, resp.p, ctrl.prop_floor, grid.points).T, grid)


def maximize_index_mrsip(
    ds: Dataset, pi_curve: CurveSet, params: MrsipParams, alpha0, ctrl: EmControl = EmControl()
):
    """Index step with proportions and linear components fixed. Returns ``(IndexVector, converged)``."""
    log_dens = log_normal_pdf(ds.y[:, None], params.means(ds.design()), params.sigma2[None, :])

    def objective(a):
        with np.errstate(divide="ignore"):
            log_pi = np.log(interp_rows(pi_curve.pi, pi_curve.grid, ds.x @ a))
        return mixture_loglik(log_pi, log_dens)

    return maximize_on_sphere(objective, np.asarray(alpha0), ctrl.simplex_step)


def _proportion_em(ds, alpha, pi_curve, params, kernel, ctrl):
    """Smooth the proportions at fixed index and components until the curves settle."""
    z = project(ds, alpha)
    grid = Grid.spanning(z, ctrl.n_grid)
    if not np.array_equal(grid.points, pi_curve.grid.points):
        pi_curve = pi_curve.regrid(grid)
    W = weight_matrix(kernel, z, grid.points)
    for _ in range(ctrl.max_em_iters):
        resp = mrsip_e_step(ds, alpha, pi_curve, params)
        new = CurveSet(local_proportions(W, resp.p, ctrl.prop_floor, grid.points).T, grid)
        delta = float(np.max(np.abs(new.pi - pi_curve.pi)))
        pi_curve = new
        if delta < ctrl.em_tol:
            break
    return pi_curve


def _resolve_init(ds, k, init, sir, seed, restarts):
    if isinstance(init, str):
        if init != "sir":
            raise InvalidArgument(f"unknown init {init!r}")
        base = fit_mixlinreg(ds, k, seed=seed, n_restarts=restarts)
        return sir_direction(ds, sir), base.params, base.pi
    alpha, params = init
    params = params if isinstance(params, MrsipParams) else MrsipParams(*params)
    if params.k != k or params.beta.shape[1] != ds.p + 1:
        raise InvalidArgument("initial parameters do not match k and the covariate dimension")
    return normalize_index(alpha), params, np.full(k, 1.0 / k)


def fit_mrsip(
    ds: Dataset,
    k: int,
    kernel: KernelSpec,
    ctrl: EmControl = EmControl(),
    init="sir",
    seed: int = 0,
    sir: SirConfig = SirConfig(),
    mixlinreg_restarts: int = 5,
) -> MrsipFit:
    """Backfitting estimator for the varying-proportion linear mixture.

    ``init`` is ``"sir"`` (SIR index plus a MixLinReg warm start) or a tuple
    ``(alpha, MrsipParams)``.

    Each outer pass smooths the proportion curves at the current index, then
    alternates one EM update of the linear components with an index step
    until the profile log-likelihood changes by less than 1e-8. An outer pass
    that lowers the full log-likelihood by more than 1e-8 is rejected and the
    loop stops at the last accepted iterate.
    """
    if k < 1:
        raise InvalidArgument("k must be at least 1")
    alpha, params, pi0 = _resolve_init(ds, k, init, sir, seed, mixlinreg_restarts)
    grid = Grid.spanning(project(ds, alpha), ctrl.n_grid)
    pi_curve = CurveSet(np.repeat(pi0[:, None], grid.N, axis=1), grid)
    fit = None
    for outer in range(1, ctrl.max_outer_iters + 1):
        new_pi = _proportion_em(ds, alpha, pi_curve, params, kernel, ctrl)
        new_alpha, new_params = alpha, params
        prev = mrsip_loglik(ds, new_alpha, new_pi, new_params)
        for _ in range(MAX_INNER):
            resp = mrsip_e_step(ds, new_alpha, new_pi, new_params)
            new_params = mrsip_update_beta_sigma(ds, resp, new_params, ctrl.var_floor_frac)
            new_alpha, _ = maximize_index_mrsip(ds, new_pi, new_params, new_alpha, ctrl)
            cur = mrsip_loglik(ds, new_alpha, new_pi, new_params)
            if abs(cur - prev) < INNER_TOL:
                break
            prev = cur
        if fit is None:
            fit = MrsipFit(new_alpha, new_params, new_pi, cur, False, outer, [cur])
        else:
            fit.n_outer_iters = outer
            if cur < fit.loglik - 1e-8:
                log.info("backfitting stopped: log-likelihood fell %.3g", fit.loglik - cur)
                break
            step = max(
                float(np.linalg.norm(new_alpha.alpha - alpha.alpha)),
                float(np.max(np.abs(new_params.beta - params.beta))),
                float(np.max(np.abs(new_params.sigma2 - params.sigma2))),
            )
            fit.alpha, fit.params, fit.pi_curve, fit.loglik = new_alpha, new_params, new_pi, cur
            fit.loglik_trace.append(cur)
            if step < ctrl.outer_tol:
                fit.converged = True
                break
        alpha, params, pi_curve = new_alpha, new_params, new_pi
    return fit
