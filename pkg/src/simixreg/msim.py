"""Mixture of single-index models: modified EM on a grid plus index backfitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import (
    CurveSet,
    Dataset,
    Grid,
    IndexVector,
    InvalidArgument,
    Responsibilities,
    interp_matrix,
    interp_rows,
    log_normal_pdf,
    mixture_loglik,
    normalize_index,
    posterior,
    project,
)
from .kernels import KernelSpec, local_proportions, weight_matrix
from .sir import SirConfig, sir_direction

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmControl:
    max_em_iters: int = 500
    em_tol: float = 1e-6
    max_outer_iters: int = 50
    outer_tol: float = 1e-6
    var_floor_frac: float = 1e-8
    prop_floor: float = 1e-6
    n_restarts: int = 1
    n_grid: int = 100
    simplex_step: float = 0.05
    max_backtracks: int = 5

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise InvalidArgument(f"{name} must be positive, got {value}")
        if self.n_grid < 2:
            raise InvalidArgument("n_grid must be at least 2")


@dataclass
class MsimFit:
    alpha: IndexVector
    curves: CurveSet
    loglik: float
    n_outer_iters: int = 0
    converged: bool = True
    loglik_trace: list[float] = field(default_factory=list)
    alpha_trace: list[np.ndarray] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.curves.k

    def component_means(self, x: np.ndarray) -> np.ndarray:
        z = np.asarray(x, dtype=float) @ self.alpha.alpha
        return interp_rows(self.curves.m, self.curves.grid, z)

    def classify(self, ds: Dataset) -> Responsibilities:
        return msim_e_step(ds, self.alpha, self.curves)

    def predict(self, ds: Dataset) -> np.ndarray:
        """Responsibility-weighted component means at the rows of ``ds``."""
        p = self.classify(ds).p
        return np.sum(p * self.component_means(ds.x), axis=1)


def _check_k(ds: Dataset, k: int):
    if k < 1:
        raise InvalidArgument("k must be at least 1")
    if ds.n < 2 * k:
        raise InvalidArgument(f"{ds.n} rows are too few for {k} components")


def _log_terms(ds: Dataset, alpha, curves: CurveSet):
    z = project(ds, alpha)
    vals = curves.at(z)
    with np.errstate(divide="ignore"):
        log_pi = np.log(vals["pi"])
    return log_pi, log_normal_pdf(ds.y[:, None], vals["m"], vals["sigma2"])


def msim_loglik(ds: Dataset, alpha, curves: CurveSet) -> float:
    """Mixture log-likelihood with curves interpolated at ``alpha^T x``."""
    return mixture_loglik(*_log_terms(ds, alpha, curves))


def msim_e_step(ds: Dataset, alpha, curves: CurveSet) -> Responsibilities:
    p, _, bad = posterior(*_log_terms(ds, alpha, curves))
    if bad:
        log.warning("%d rows underflowed in every component; assigned uniformly", bad)
    return Responsibilities(p)


def _m_step(y, P, W, grid, var_floor, prop_floor) -> CurveSet:
    pi = local_proportions(W, P, prop_floor, grid.points)
    # centred moments keep the variance identity well conditioned
    ybar = float(y.mean())
    yc = y - ybar
    WP = W @ P
    S1 = W @ (P * yc[:, None])
    S2 = W @ (P * (yc * yc)[:, None])
    # components with (numerically) no local mass fall back to the plain local moments
    total = W.sum(axis=1)[:, None]
    thin = WP <= 1e-12 * total
    if np.any(thin):
        WP = np.where(thin, total, WP)
        S1 = np.where(thin, (W @ yc)[:, None], S1)
        S2 = np.where(thin, (W @ (yc * yc))[:, None], S2)
    mc = S1 / WP
    s2 = np.maximum(S2 / WP - mc * mc, var_floor)
    return CurveSet._unchecked(pi.T.copy(), grid, (mc + ybar).T.copy(), s2.T.copy())


def msim_m_step(
    ds: Dataset,
    alpha,
    resp: Responsibilities,
    kernel: KernelSpec,
    grid: Grid,
    ctrl: EmControl = EmControl(),
) -> CurveSet:
    """Kernel-weighted update of proportion, mean and variance curves on ``grid``.

    Means are updated before variances, and the variance residuals use the
    new mean at each grid point.
    """
    z = project(ds, alpha)
    W = weight_matrix(kernel, z, grid.points)
    floor = ctrl.var_floor_frac * float(np.var(ds.y))
    return _m_step(ds.y, resp.p, W, grid, floor, ctrl.prop_floor)


def _curve_change(a: CurveSet, b: CurveSet) -> float:
    return max(
        float(np.max(np.abs(a.pi - b.pi))),
        float(np.max(np.abs(a.m - b.m))),
        float(np.max(np.abs(a.sigma2 - b.sigma2))),
    )


def msim_em(
    ds: Dataset,
    alpha,
    init: Responsibilities | CurveSet,
    kernel: KernelSpec,
    grid: Grid,
    ctrl: EmControl = EmControl(),
    on_iter=None,
):
    """Modified EM over a shared grid.

    ``init`` is either starting responsibilities or starting curves (which
    must live on ``grid``). Returns ``(curves, responsibilities, n_iters,
    converged)``. ``on_iter(curves, resp)`` is called after every iteration.
    """
    z = project(ds, alpha)
    W = weight_matrix(kernel, z, grid.points)
    A = interp_matrix(grid, z)
    y = ds.y[:, None]
    floor = ctrl.var_floor_frac * float(np.var(ds.y))

    def m_step(P):
        return _m_step(ds.y, P, W, grid, floor, ctrl.prop_floor)

    def e_step(c):
        k = c.k
        vals = A @ np.vstack([c.pi, c.m, c.sigma2]).T
        with np.errstate(divide="ignore"):
            log_pi = np.log(vals[:, :k])
        p, _, bad = posterior(log_pi, log_normal_pdf(y, vals[:, k : 2 * k], vals[:, 2 * k :]))
        if bad:
            log.warning("%d rows underflowed in every component; assigned uniformly", bad)
        return p

    if isinstance(init, Responsibilities):
        curves = m_step(init.p)
    else:
        if init.grid.N != grid.N or not np.array_equal(init.grid.points, grid.points):
            init = init.regrid(grid)
        curves = init
    converged = False
    it = 0
    for it in range(1, ctrl.max_em_iters + 1):
        P = e_step(curves)
        new = m_step(P)
        delta = _curve_change(new, curves)
        curves = new
        if on_iter is not None:
            on_iter(curves, Responsibilities(P))
        if delta < ctrl.em_tol:
            converged = True
            break
    curves = CurveSet(curves.pi, grid, curves.m, curves.sigma2)
    return curves, Responsibilities(e_step(curves)), it, converged


def initial_responsibilities(z: np.ndarray, y: np.ndarray, k: int, n_bins: int | None = None):
    """Hard split into ``k`` groups by y-quantile inside coarse bins of the index.

    Lower responses go to lower component labels.
    """
    n = z.size
    if n_bins is None:
        n_bins = int(np.clip(n // 50, 1, 10))
    P = np.zeros((n, k))
    order = np.argsort(z, kind="stable")
    for rows in np.array_split(order, n_bins):
        ranks = np.argsort(np.argsort(y[rows], kind="stable"), kind="stable")
        groups = np.minimum(ranks * k // rows.size, k - 1)
        P[rows, groups] = 1.0
    return Responsibilities(P)


def _restart_responsibilities(base: Responsibilities, rng: np.random.Generator):
    noisy = 0.5 * base.p + rng.uniform(size=base.p.shape)
    return Responsibilities(noisy / noisy.sum(axis=1, keepdims=True))


def tangent_basis(alpha: np.ndarray) -> np.ndarray:
    """Orthonormal basis (p x p-1) of the complement of ``alpha``."""
    p = alpha.size
    q, _ = np.linalg.qr(np.column_stack([alpha, np.eye(p)]))
    return q[:, 1:p]


def maximize_on_sphere(objective, alpha0, step: float = 0.05, maxiter: int | None = None):
    """Maximize ``objective(alpha)`` over unit vectors near ``alpha0``.

    Nelder-Mead runs on the p-1 tangent coordinates around ``alpha0``; each
    trial point is mapped back to the sphere and sign-normalized. Returns
    ``(IndexVector, converged)``. The result never scores below ``alpha0``.
    """
    a0 = normalize_index(alpha0).alpha
    p = a0.size
    if p == 1:
        return normalize_index(a0), True
    B = tangent_basis(a0)

    def chart(theta):
        v = a0 + B @ theta
        v = v / np.sqrt(v @ v)
        return -v if v[np.flatnonzero(v)[0]] < 0 else v

    def neg(theta):
        val = objective(chart(theta))
        return -val if np.isfinite(val) else np.inf

    f0 = -neg(np.zeros(p - 1))
    simplex = np.vstack([np.zeros(p - 1), step * np.eye(p - 1)])
    try:
        res = minimize(
            neg,
            np.zeros(p - 1),
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-8,
                "fatol": 1e-10,
                "maxiter": maxiter or 400 * (p - 1),
            },
        )
    except (ValueError, FloatingPointError) as exc:
        log.warning("index search failed: %s", exc)
        return normalize_index(a0), False
    if not np.isfinite(res.fun) or -res.fun < f0:
        return normalize_index(a0), bool(res.success)
    return normalize_index(chart(res.x)), bool(res.success)


def maximize_index_msim(ds: Dataset, curves: CurveSet, alpha0, ctrl: EmControl = EmControl()):
    """Refine the index with the curves held fixed. Returns ``(IndexVector, converged)``."""
    return maximize_on_sphere(
        lambda a: msim_loglik(ds, a, curves), np.asarray(alpha0), ctrl.simplex_step
    )


def _em_with_restarts(ds, alpha, k, kernel, ctrl, seed):
    z = project(ds, alpha)
    grid = Grid.spanning(z, ctrl.n_grid)
    base = initial_responsibilities(z, ds.y, k)
    rng = np.random.default_rng(seed)
    best = None
    for r in range(ctrl.n_restarts):
        init = base if r == 0 else _restart_responsibilities(base, rng)
        curves, _, _, ok = msim_em(ds, alpha, init, kernel, grid, ctrl)
        ll = msim_loglik(ds, alpha, curves)
        if best is None or ll > best[1]:
            best = (curves, ll, ok)
    return best


def fit_msim_fixed_index(
    ds: Dataset, k: int, kernel: KernelSpec, alpha, ctrl: EmControl = EmControl(), seed: int = 0
) -> MsimFit:
    """Curve estimation at a given index, without refining the index."""
    _check_k(ds, k)
    alpha = normalize_index(alpha)
    curves, ll, ok = _em_with_restarts(ds, alpha, k, kernel, ctrl, seed)
    return MsimFit(alpha, curves, ll, 0, ok, [ll], [alpha.alpha.copy()])


def fit_msim_os(
    ds: Dataset,
    k: int,
    kernel: KernelSpec,
    ctrl: EmControl = EmControl(),
    seed: int = 0,
    sir: SirConfig = SirConfig(),
) -> MsimFit:
    """One-step estimator: SIR direction, then a single modified-EM pass."""
    return fit_msim_fixed_index(ds, k, kernel, sir_direction(ds, sir), ctrl, seed)


def fit_msim_fib(
    ds: Dataset,
    k: int,
    kernel: KernelSpec,
    ctrl: EmControl = EmControl(),
    init="sir",
    seed: int = 0,
    sir: SirConfig = SirConfig(),
) -> MsimFit:
    """Fully iterative backfitting.

    Alternates the modified EM (curves given the index) with index refinement
    (index given the curves). After every index move the grid is re-spanned
    over the new index range and the curves are carried over as a warm start.
    A move is accepted only if the full-data log-likelihood does not drop by
    more than 1e-8. A rejected move is halved (up to ``ctrl.max_backtracks``
    times); if no fraction is accepted the loop stops at the last accepted
    iterate and the fit is flagged as not converged.

    ``init`` is ``"sir"`` or a starting direction.
    """
    _check_k(ds, k)
    if isinstance(init, str):
        if init != "sir":
            raise InvalidArgument(f"unknown init {init!r}")
        alpha = sir_direction(ds, sir)
    else:
        alpha = normalize_index(init)
    curves, ll, _ = _em_with_restarts(ds, alpha, k, kernel, ctrl, seed)
    fit = MsimFit(alpha, curves, ll, 0, False, [ll], [alpha.alpha.copy()])
    for it in range(1, ctrl.max_outer_iters + 1):
        proposal, _ = maximize_index_msim(ds, fit.curves, fit.alpha, ctrl)
        move = proposal.alpha - fit.alpha.alpha
        fit.n_outer_iters = it
        accepted = None
        # backtrack along the chord when the refitted curves lose likelihood
        for frac in 0.5 ** np.arange(ctrl.max_backtracks + 1):
            trial = normalize_index(fit.alpha.alpha + frac * move)
            grid = Grid.spanning(project(ds, trial), ctrl.n_grid)
            curves, _, _, _ = msim_em(ds, trial, fit.curves.regrid(grid), kernel, grid, ctrl)
            ll = msim_loglik(ds, trial, curves)
            if ll >= fit.loglik - 1e-8:
                accepted = (trial, curves, ll)
                break
        if accepted is None:
            log.info("backfitting stopped: no step along the index move kept the log-likelihood")
            break
        fit.alpha, fit.curves, fit.loglik = accepted
        fit.loglik_trace.append(fit.loglik)
        fit.alpha_trace.append(fit.alpha.alpha.copy())
        if float(np.linalg.norm(move)) < ctrl.outer_tol:
            fit.converged = True
            break
    return fit
