"""Bandwidth choice by repeated L-fold cross-validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, DegenerateWindowError, InvalidArgument, NumericalRankError, Responsibilities, project
from .kernels import KernelSpec
from .linreg import MrsipParams
from .mrsip import fit_mrsip
from .msim import EmControl, fit_msim_fib, fit_msim_fixed_index
from .sir import sir_direction

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    """No candidate bandwidth produced a usable fit."""


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation settings.

    ``fit_mode="one-step"`` refits SIR and the modified EM on each training
    fold; ``"backfit"`` runs the full backfitting estimator on each fold,
    warm-started from the full-data estimate.
    """

    folds: int = 10
    repeats: int = 30
    candidates: tuple[float, ...] | None = None
    model: str = "msim"
    k: int = 2
    kernel: str = "epanechnikov"
    fit_mode: str = "one-step"

    def __post_init__(self):
        if self.folds < 2 or self.repeats < 1:
            raise InvalidArgument("need folds >= 2 and repeats >= 1")
        if self.model not in ("msim", "mrsip"):
            raise InvalidArgument(f"unknown model {self.model!r}")
        if self.fit_mode not in ("one-step", "backfit"):
            raise InvalidArgument(f"unknown fit mode {self.fit_mode!r}")
        if self.candidates is not None:
            c = np.asarray(self.candidates, dtype=float)
            if c.size == 0 or np.any(c <= 0) or np.any(np.diff(c) <= 0):
                raise InvalidArgument("candidates must be positive and strictly increasing")
            object.__setattr__(self, "candidates", tuple(float(v) for v in c))


def default_candidates(ds: Dataset, count: int = 20) -> np.ndarray:
    """Geometric grid over [0.5, 2] times a normal-reference bandwidth of the SIR index."""
    z = project(ds, sir_direction(ds))
    h_rot = 1.06 * float(np.std(z, ddof=1)) * ds.n ** (-0.2)
    return np.geomspace(0.5 * h_rot, 2.0 * h_rot, count)


def classification_probs(test: Dataset, fit) -> Responsibilities:
    """Posterior component probabilities of held-out rows under a fitted model."""
    return fit.classify(test)


def cv_predict(test: Dataset, fit) -> np.ndarray:
    """Classification-weighted component means for held-out rows."""
    p = classification_probs(test, fit).p
    return np.sum(p * fit.component_means(test.x), axis=1)


def fold_partition(n: int, folds: int, seed) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, folds)]


class _FoldFitter:
    def __init__(self, ds: Dataset, cfg: CvConfig, ctrl: EmControl, warm=None):
        self.ds, self.cfg, self.ctrl, self.warm = ds, cfg, ctrl, warm

    def __call__(self, train: Dataset, h: float, seed: int):
        kern = KernelSpec(self.cfg.kernel, h)
        if self.cfg.model == "msim":
            if self.cfg.fit_mode == "one-step":
                return fit_msim_fixed_index(train, self.cfg.k, kern, sir_direction(train), self.ctrl, seed)
            return fit_msim_fib(train, self.cfg.k, kern, self.ctrl, init=self.warm, seed=seed)
        if self.cfg.fit_mode == "backfit" and self.warm is not None:
            return fit_mrsip(train, self.cfg.k, kern, self.ctrl, init=self.warm, seed=seed)
        return fit_mrsip(train, self.cfg.k, kern, self.ctrl, init="sir", seed=seed)


def _warm_start(ds: Dataset, cfg: CvConfig, ctrl: EmControl, h: float):
    if cfg.fit_mode != "backfit":
        return None
    kern = KernelSpec(cfg.kernel, h)
    if cfg.model == "msim":
        return fit_msim_fib(ds, cfg.k, kern, ctrl).alpha
    fit = fit_mrsip(ds, cfg.k, kern, ctrl)
    return fit.alpha, MrsipParams(fit.params.beta, fit.params.sigma2)


def cv_score(
    ds: Dataset,
    h: float,
    cfg: CvConfig = CvConfig(),
    ctrl: EmControl = EmControl(),
    seed=0,
    fitter=None,
    folds: list[np.ndarray] | None = None,
) -> float:
    """Sum over folds of squared held-out prediction errors.

    ``fitter(train, h, seed)`` must return an object with ``classify`` and
    ``component_means``; by default the model named in ``cfg`` is used. A
    bandwidth that leaves an empty kernel window on any training fold scores
    ``inf``.
    """
    if fitter is None:
        fitter = _FoldFitter(ds, cfg, ctrl, _warm_start(ds, cfg, ctrl, h))
    if folds is None:
        folds = fold_partition(ds.n, cfg.folds, seed)
    mask = np.ones(ds.n, dtype=bool)
    total = 0.0
    for test in folds:
        mask[:] = True
        mask[test] = False
        train, held = ds.subset(np.flatnonzero(mask)), ds.subset(test)
        try:
            fit = fitter(train, h, 0)
            pred = cv_predict(held, fit)
        except (DegenerateWindowError, NumericalRankError) as exc:
            log.info("bandwidth %.4g infeasible: %s", h, exc)
            return float("inf")
        total += float(np.sum((held.y - pred) ** 2))
    return total


@dataclass
class BandwidthSelection:
    h_hat: float
    candidates: np.ndarray
    scores: np.ndarray  # repeats x candidates
    winners: np.ndarray
    n: int = 0
    table: dict[float, float] = field(default_factory=dict)

    @property
    def operating(self) -> tuple[float, float, float]:
        """Under-smoothing, selected and over-smoothing bandwidths."""
        return (self.h_hat * self.n ** (-2 / 15), self.h_hat, 1.5 * self.h_hat)


def select_bandwidth(
    ds: Dataset, cfg: CvConfig = CvConfig(), ctrl: EmControl = EmControl(), seed=0, fitter=None
) -> BandwidthSelection:
    """Average of the per-repeat CV minimizers.

    Repeat ``r`` partitions the rows with child ``r`` of ``SeedSequence(seed)``;
    every candidate is scored on the same partition within a repeat.
    """
    cands = np.asarray(cfg.candidates if cfg.candidates is not None else default_candidates(ds))
    warm = {}
    scores = np.full((cfg.repeats, cands.size), np.inf)
    children = np.random.SeedSequence(seed).spawn(cfg.repeats)
    for r, child in enumerate(children):
        folds = fold_partition(ds.n, cfg.folds, child)
        for c, h in enumerate(cands):
            fit_fn = fitter
            if fit_fn is None:
                if h not in warm:
                    warm[h] = _FoldFitter(ds, cfg, ctrl, _warm_start(ds, cfg, ctrl, h))
                fit_fn = warm[h]
            scores[r, c] = cv_score(ds, h, cfg, ctrl, fitter=fit_fn, folds=folds)
    feasible = np.isfinite(scores).any(axis=1)
    if not feasible.any():
        raise ConfigurationError("every candidate bandwidth was infeasible")
    winners = cands[np.argmin(scores[feasible], axis=1)]
    with np.errstate(invalid="ignore"):
        means = np.where(np.isfinite(scores).all(axis=0), scores.mean(axis=0), np.inf)
    return BandwidthSelection(
        float(winners.mean()),
        cands,
        scores,
        winners,
        ds.n,
        {float(h): float(s) for h, s in zip(cands, means)},
    )
