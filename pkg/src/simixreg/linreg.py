"""Linear-component building blocks: weighted least squares, OLS and MixLinReg."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Dataset, InvalidArgument, NumericalRankError, Responsibilities, log_normal_pdf, posterior

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MrsipParams:
    """Intercept-augmented coefficients ``beta`` (k x (p+1)) and variances (k,)."""

    beta: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        beta = np.atleast_2d(np.array(self.beta, dtype=float))
        s2 = np.atleast_1d(np.array(self.sigma2, dtype=float))
        if s2.shape != (beta.shape[0],):
            raise InvalidArgument("need one variance per component")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(s2))):
            raise InvalidArgument("parameters must be finite")
        if np.any(s2 <= 0):
            raise InvalidArgument("component variances must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", s2)
        k = beta.shape[0]
        for a in range(k):
            for b in range(a + 1, k):
                if np.allclose(beta[a], beta[b], rtol=0, atol=1e-8) and abs(s2[a] - s2[b]) <= 1e-8:
                    warnings.warn(f"components {a} and {b} coincide; model is not identifiable")

    @property
    def k(self) -> int:
        return self.beta.shape[0]

    def means(self, S: np.ndarray) -> np.ndarray:
        """n x k component means for an intercept-augmented design ``S``."""
        return S @ self.beta.T

    def permuted(self, perm) -> "MrsipParams":
        perm = list(perm)
        return MrsipParams(self.beta[perm], self.sigma2[perm])


def _solve_normal(S: np.ndarray, w: np.ndarray, y: np.ndarray) -> np.ndarray:
    A = S.T @ (w[:, None] * S)
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e12:
        raise NumericalRankError("weighted normal equations are rank deficient")
    return np.linalg.solve(A, S.T @ (w * y))


def mrsip_update_beta_sigma(
    ds: Dataset,
    resp: Responsibilities,
    prev: MrsipParams | None = None,
    var_floor_frac: float = 1e-8,
) -> MrsipParams:
    """Weighted least squares per component, then the weighted residual variance.

    A component whose total responsibility is below ``2(p+1)`` keeps its
    coefficients from ``prev`` when one is given.
    """
    S = ds.design()
    P = resp.p
    floor = var_floor_frac * float(np.var(ds.y))
    beta = np.empty((P.shape[1], S.shape[1]))
    s2 = np.empty(P.shape[1])
    for j in range(P.shape[1]):
        w = P[:, j]
        mass = w.sum()
        if prev is not None and mass < 2 * S.shape[1]:
            log.info("component %d has effective size %.2f; coefficients frozen", j, mass)
            beta[j] = prev.beta[j]
        else:
            beta[j] = _solve_normal(S, w, ds.y)
        if mass > 0:
            s2[j] = w @ (ds.y - S @ beta[j]) ** 2 / mass
        else:
            s2[j] = prev.sigma2[j] if prev is not None else floor
    return MrsipParams(beta, np.maximum(s2, floor))


def fit_ols(ds: Dataset) -> np.ndarray:
    """Intercept-augmented least-squares coefficients."""
    coef, *_ = np.linalg.lstsq(ds.design(), ds.y, rcond=None)
    return coef


@dataclass
class MixLinRegFit:
    params: MrsipParams
    pi: np.ndarray
    loglik: float
    n_iter: int
    converged: bool

    @property
    def k(self) -> int:
        return self.params.k

    def component_means(self, x: np.ndarray) -> np.ndarray:
        return self.params.means(np.column_stack([np.ones(len(x)), x]))

    def classify(self, ds: Dataset) -> Responsibilities:
        p, _, _ = posterior(*self._log_terms(ds))
        return Responsibilities(p)

    def predict(self, ds: Dataset) -> np.ndarray:
        return np.sum(self.classify(ds).p * self.component_means(ds.x), axis=1)

    def _log_terms(self, ds):
        mu = self.params.means(ds.design())
        log_pi = np.broadcast_to(np.log(self.pi), mu.shape)
        return log_pi, log_normal_pdf(ds.y[:, None], mu, self.params.sigma2[None, :])


def _mixlinreg_em(ds, P, max_iter, tol, var_floor_frac):
    S = ds.design()
    params = mrsip_update_beta_sigma(ds, Responsibilities(P), var_floor_frac=var_floor_frac)
    pi = P.mean(axis=0)
    ll_old = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = params.means(S)
        p, ll_rows, _ = posterior(np.log(pi)[None, :], log_normal_pdf(ds.y[:, None], mu, params.sigma2))
        ll = float(ll_rows.sum())
        pi = np.clip(p.mean(axis=0), 1e-6, 1)
        pi /= pi.sum()
        params = mrsip_update_beta_sigma(ds, Responsibilities(p), params, var_floor_frac)
        if abs(ll - ll_old) < tol * (1 + abs(ll)):
            converged = True
            break
        ll_old = ll
    fit = MixLinRegFit(params, pi, 0.0, it, converged)
    _, ll_rows, _ = posterior(*fit._log_terms(ds))
    fit.loglik = float(ll_rows.sum())
    return fit


def fit_mixlinreg(
    ds: Dataset,
    k: int,
    seed=0,
    n_restarts: int = 5,
    max_iter: int = 1000,
    tol: float = 1e-10,
    var_floor_frac: float = 1e-8,
) -> MixLinRegFit:
    """EM for a k-component mixture of linear regressions with constant proportions.

    The first start splits rows by OLS residual quantile; the remaining starts
    use random soft assignments. The fit with the largest log-likelihood wins.
    """
    if k < 1:
        raise InvalidArgument("k must be at least 1")
    if ds.n <= k * (ds.p + 1):
        raise InvalidArgument(f"{ds.n} rows are too few for {k} linear components")
    resid = ds.y - ds.design() @ fit_ols(ds)
    ranks = np.argsort(np.argsort(resid, kind="stable"), kind="stable")
    P0 = np.eye(k)[np.minimum(ranks * k // ds.n, k - 1)]
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, n_restarts) if k > 1 else 1):
        P = P0 if r == 0 else rng.dirichlet(np.ones(k), size=ds.n)
        try:
            fit = _mixlinreg_em(ds, P, max_iter, tol, var_floor_frac)
        except NumericalRankError as exc:
            log.info("MixLinReg restart %d failed: %s", r, exc)
            continue
        if best is None or fit.loglik > best.loglik:
            best = fit
    if best is None:
        raise NumericalRankError("every MixLinReg restart collapsed")
    return best


@dataclass
class OlsFit:
    """Single linear regression; the baseline for prediction comparisons."""

    coef: np.ndarray

    @classmethod
    def fit(cls, ds: Dataset) -> "OlsFit":
        return cls(fit_ols(ds))

    def predict(self, ds: Dataset) -> np.ndarray:
        return ds.design() @ self.coef
