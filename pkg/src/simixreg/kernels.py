"""Compactly supported kernels and kernel-weighted averages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DegenerateWindowError, InvalidArgument

FAMILIES = ("epanechnikov", "quartic")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "epanechnikov"
    h: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown kernel family {self.family!r}")
        if not (np.isfinite(self.h) and self.h > 0):
            raise InvalidArgument(f"bandwidth must be positive, got {self.h}")

    def with_bandwidth(self, h: float) -> "KernelSpec":
        return KernelSpec(self.family, float(h))


def _profile(family: str, u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) < 1.0
    if family == "epanechnikov":
        k = 0.75 * (1.0 - u * u)
    else:
        k = (15.0 / 16.0) * (1.0 - u * u) ** 2
    return np.where(inside, k, 0.0)


def kernel_weight(spec: KernelSpec, t):
    """Scaled kernel ``K(t/h)/h``; zero outside ``|t| < h``."""
    t_arr = np.asarray(t, dtype=float)
    out = _profile(spec.family, t_arr / spec.h) / spec.h
    return float(out) if out.ndim == 0 else out


def weight_matrix(spec: KernelSpec, z: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Kernel weights ``K_h(z_i - u_t)`` as an N x n matrix (rows = grid points)."""
    return kernel_weight(spec, np.subtract.outer(points, z))


def weighted_mean(values, weights) -> float:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise InvalidArgument("values and weights must have equal length")
    if np.any(weights < 0):
        raise InvalidArgument("weights must be nonnegative")
    total = weights.sum()
    if not total > 0:
        raise DegenerateWindowError("all kernel weights are zero; widen the bandwidth")
    return float(weights @ values / total)


def local_proportions(W: np.ndarray, P: np.ndarray, prop_floor: float, points=None) -> np.ndarray:
    """Kernel-smoothed responsibilities (N x k), clamped to ``[floor, 1-floor]`` and renormalized."""
    total = W.sum(axis=1)
    empty = np.flatnonzero(total <= 0)
    if empty.size:
        where = f" at u={points[empty[0]]:.6g}" if points is not None else ""
        raise DegenerateWindowError(f"no observations within the kernel window{where}")
    pi = (W @ P) / total[:, None]
    if P.shape[1] == 1:
        return np.ones_like(pi)
    pi = np.clip(pi, prop_floor, 1 - prop_floor)
    return pi / pi.sum(axis=1, keepdims=True)
