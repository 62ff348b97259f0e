"""Sliced inverse regression for the initial index direction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, IndexVector, InvalidArgument, NumericalRankError, normalize_index


@dataclass(frozen=True)
class SirConfig:
    n_slices: int = 10
    ridge: float = 1e-10

    def __post_init__(self):
        if self.n_slices < 2:
            raise InvalidArgument("SIR needs at least 2 slices")
        if self.ridge < 0:
            raise InvalidArgument("ridge must be nonnegative")


def _inv_sqrt(cov: np.ndarray, ridge: float) -> np.ndarray:
    cov = cov + ridge * np.eye(cov.shape[0])
    w, v = np.linalg.eigh(cov)
    if w[0] <= 1e-12 * max(w[-1], 1.0):
        raise NumericalRankError("covariate covariance is numerically singular")
    return (v / np.sqrt(w)) @ v.T


def slice_labels(y: np.ndarray, n_slices: int) -> np.ndarray:
    """Slice index per row after a stable sort on ``y``."""
    order = np.argsort(y, kind="stable")
    labels = np.empty(y.size, dtype=int)
    for s, chunk in enumerate(np.array_split(order, n_slices)):
        labels[chunk] = s
    return labels


def sir_directions(ds: Dataset, cfg: SirConfig = SirConfig()):
    """All SIR eigenvalues (descending) and back-transformed directions (columns)."""
    n, p = ds.x.shape
    if n < 2 * cfg.n_slices:
        raise InvalidArgument(
            f"{n} rows cannot fill {cfg.n_slices} slices with 2 rows each"
        )
    xc = ds.x - ds.x.mean(axis=0)
    root = _inv_sqrt(np.cov(xc, rowvar=False, bias=True).reshape(p, p), cfg.ridge)
    zs = xc @ root
    labels = slice_labels(ds.y, cfg.n_slices)
    between = np.zeros((p, p))
    for s in range(cfg.n_slices):
        rows = labels == s
        mean = zs[rows].mean(axis=0)
        between += rows.mean() * np.outer(mean, mean)
    w, v = np.linalg.eigh(between)
    order = np.argsort(w)[::-1]
    return w[order], root @ v[:, order]


def sir_direction(ds: Dataset, cfg: SirConfig = SirConfig()) -> IndexVector:
    """Leading SIR direction, normalized to the index sign convention."""
    _, dirs = sir_directions(ds, cfg)
    return normalize_index(dirs[:, 0])
