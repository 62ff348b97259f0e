"""Data generators for the two simulation designs and their true curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Dataset, IndexVector, InvalidArgument, normalize_index

TRUE_ALPHA = normalize_index(np.ones(3))
EXAMPLE2_BETA = np.array([[1.0, 0.0, 3.0, 0.0], [-1.0, 2.0, 0.0, 3.0]])
EXAMPLE2_SIGMA2 = np.array([0.7, 0.6])


@dataclass(frozen=True)
class TruthSpec:
    """True model. Curve callables map index values (m,) to k x m arrays."""

    alpha: IndexVector
    pi: Callable[[np.ndarray], np.ndarray]
    m: Callable[[np.ndarray], np.ndarray] | None = None
    sigma2: Callable[[np.ndarray], np.ndarray] | None = None
    beta: np.ndarray | None = None
    beta_sigma2: np.ndarray | None = None
    labels: np.ndarray | None = None

    def curves(self, u) -> dict[str, np.ndarray]:
        u = np.asarray(u, dtype=float)
        out = {"pi": self.pi(u)}
        if self.m is not None:
            out["m"] = self.m(u)
            out["sigma2"] = self.sigma2(u)
        return out

    def component_means(self, x: np.ndarray) -> np.ndarray:
        """n x k true component means at covariate rows ``x``."""
        x = np.asarray(x, dtype=float)
        if self.beta is not None:
            return np.column_stack([np.ones(len(x)), x]) @ self.beta.T
        return self.m(x @ self.alpha.alpha).T


def ex1_pi(z):
    p1 = 0.5 + 0.3 * np.sin(np.pi * z)
    return np.vstack([p1, 1 - p1])


def ex1_m(z):
    return np.vstack([3 - np.sin(2 * np.pi * z / np.sqrt(3)), np.cos(np.sqrt(3) * np.pi * z)])


def ex1_sd(z):
    return np.vstack([0.7 + np.sin(3 * np.pi * z) / 15, 0.3 + np.cos(1.3 * np.pi * z) / 10])


def ex1_sigma2(z):
    return ex1_sd(z) ** 2


def ex2_pi(z):
    p1 = 0.5 - 0.35 * np.sin(np.pi * z)
    return np.vstack([p1, 1 - p1])


def _draw_labels(rng, pi):
    # pi is k x n; inverse-cdf draw per column
    cum = np.cumsum(pi, axis=0)
    u = rng.uniform(size=pi.shape[1])
    return np.minimum((u[None, :] > cum).sum(axis=0), pi.shape[0] - 1)


def gen_example1(n: int, seed) -> tuple[Dataset, TruthSpec]:
    """Two-component MSIM with trigonometric curves over ``z = (x1+x2+x3)/sqrt(3)``."""
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, 3))
    z = x @ TRUE_ALPHA.alpha
    c = _draw_labels(rng, ex1_pi(z))
    cols = np.arange(n)
    y = rng.normal(ex1_m(z)[c, cols], ex1_sd(z)[c, cols])
    truth = TruthSpec(TRUE_ALPHA, ex1_pi, ex1_m, ex1_sigma2, labels=c)
    return Dataset(x, y, ("x1", "x2", "x3")), truth


def gen_example2(n: int, seed) -> tuple[Dataset, TruthSpec]:
    """Two linear components with index-varying proportions."""
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, 3))
    z = x @ TRUE_ALPHA.alpha
    c = _draw_labels(rng, ex2_pi(z))
    means = np.column_stack([np.ones(n), x]) @ EXAMPLE2_BETA.T
    cols = np.arange(n)
    y = rng.normal(means[cols, c], np.sqrt(EXAMPLE2_SIGMA2[c]))
    truth = TruthSpec(
        TRUE_ALPHA, ex2_pi, beta=EXAMPLE2_BETA.copy(), beta_sigma2=EXAMPLE2_SIGMA2.copy(), labels=c
    )
    return Dataset(x, y, ("x1", "x2", "x3")), truth
