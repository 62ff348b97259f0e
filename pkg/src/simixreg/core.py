"""Shared domain types: datasets, index directions, grids and curve sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidArgument(ValueError):
    """Raised when an input violates an operation's preconditions."""


class DegenerateWindowError(ArithmeticError):
    """A kernel window contains no observations with positive weight."""


class NumericalRankError(np.linalg.LinAlgError):
    """A covariance or normal-equation matrix is numerically singular."""


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``x`` (n x p) and response ``y`` (n,)."""

    x: np.ndarray
    y: np.ndarray
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise InvalidArgument("x must be a 2-d array")
        n, p = x.shape
        if n < 2 or p < 1:
            raise InvalidArgument(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise InvalidArgument(f"x has {n} rows but y has {y.shape[0]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgument("dataset contains non-finite entries")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise InvalidArgument(f"{len(names)} column names for {p} columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.x[rows], self.y[rows], self.column_names)

    def design(self) -> np.ndarray:
        """Intercept-augmented design ``[1, x]`` used by linear components."""
        return np.column_stack([np.ones(self.n), self.x])


@dataclass(frozen=True)
class IndexVector:
    """Unit-norm direction whose first nonzero entry is positive.

    Construct through :func:`normalize_index`; the constructor only validates.
    """

    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float).ravel()
        if a.size == 0 or not np.all(np.isfinite(a)):
            raise InvalidArgument("index must be a finite non-empty vector")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise InvalidArgument("index must have unit norm")
        nz = np.flatnonzero(a)
        if a[nz[0]] <= 0:
            raise InvalidArgument("first nonzero entry of the index must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def p(self) -> int:
        return self.alpha.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.alpha, dtype=dtype)


def normalize_index(v) -> IndexVector:
    """Scale ``v`` to unit length and flip its sign so the first nonzero entry is positive."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise InvalidArgument("cannot normalize a non-finite or empty vector")
    if not np.any(v):
        raise InvalidArgument("cannot normalize the zero vector")
    eps = 4 * np.finfo(float).eps
    a = v
    # vectors already unit to rounding are kept as is, so normalizing twice is exact;
    # otherwise scale by the largest entry first so the norm cannot overflow
    if not abs(np.linalg.norm(a) - 1.0) <= eps:
        a = a / np.max(np.abs(a))
        for _ in range(3):
            nrm = np.linalg.norm(a)
            if abs(nrm - 1.0) <= eps:
                break
            a = a / nrm
    # sign is read after scaling: a subnormal leading entry may have flushed to zero
    if a[np.flatnonzero(a)[0]] < 0:
        a = -a
    a = a + 0.0  # no negative zeros
    return IndexVector(a)


def project(ds: Dataset, a, intercept: bool = False) -> np.ndarray:
    """Index values ``alpha^T x_i`` for every row.

    With ``intercept=True`` the first column of ``ds.x`` is treated as a
    constant column and left out of the index.
    """
    alpha = np.asarray(a, dtype=float)
    x = ds.x[:, 1:] if intercept else ds.x
    if alpha.shape != (x.shape[1],):
        raise InvalidArgument(
            f"index has dimension {alpha.size}, covariate block has {x.shape[1]}"
        )
    return x @ alpha


@dataclass(frozen=True)
class Grid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise InvalidArgument("a grid needs at least 2 points")
        if not np.all(np.isfinite(pts)) or np.any(np.diff(pts) <= 0):
            raise InvalidArgument("grid points must be finite and strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.size

    @classmethod
    def spanning(cls, z, N: int = 100) -> "Grid":
        """``N`` equally spaced points over ``[min z, max z]``."""
        z = np.asarray(z, dtype=float)
        lo, hi = float(np.min(z)), float(np.max(z))
        if not hi > lo:
            raise InvalidArgument("index values are all equal; cannot span a grid")
        return cls(np.linspace(lo, hi, N))


def interp_curve(values_at_grid, grid: Grid, z):
    """Piecewise-linear interpolation of grid values, clamped outside the grid.

    Accepts a scalar or an array of evaluation points.
    """
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)):
        raise InvalidArgument("evaluation point must be finite")
    out = np.interp(z_arr, grid.points, np.asarray(values_at_grid, dtype=float))
    return float(out) if out.ndim == 0 else out


def interp_rows(values: np.ndarray, grid: Grid, z: np.ndarray) -> np.ndarray:
    """Interpolate each row of a k x N table at ``z``; returns an n x k array."""
    return np.column_stack([np.interp(z, grid.points, row) for row in values])


def interp_matrix(grid: Grid, z: np.ndarray) -> np.ndarray:
    """Dense n x N matrix ``A`` with ``A @ values == np.interp(z, grid, values)`` (clamped)."""
    pts = grid.points
    zc = np.clip(np.asarray(z, dtype=float), pts[0], pts[-1])
    idx = np.clip(np.searchsorted(pts, zc, side="right") - 1, 0, pts.size - 2)
    frac = (zc - pts[idx]) / (pts[idx + 1] - pts[idx])
    A = np.zeros((zc.size, pts.size))
    rows = np.arange(zc.size)
    A[rows, idx] = 1.0 - frac
    A[rows, idx + 1] += frac
    return A


@dataclass(frozen=True)
class CurveSet:
    """Grid-sampled component curves.

    ``pi`` is always present; ``m`` and ``sigma2`` are only set for MSIM fits.
    """

    pi: np.ndarray
    grid: Grid
    m: np.ndarray | None = None
    sigma2: np.ndarray | None = None

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        if pi.ndim != 2 or pi.shape[1] != self.grid.N:
            raise InvalidArgument("pi must be k x N")
        if not np.allclose(pi.sum(axis=0), 1.0, rtol=0, atol=1e-10):
            raise InvalidArgument("proportions must sum to one at every grid point")
        # a single component carries proportion exactly one
        if pi.shape[0] > 1 and (np.any(pi <= 0) or np.any(pi >= 1)):
            raise InvalidArgument("proportions must lie strictly inside (0, 1)")
        object.__setattr__(self, "pi", pi)
        for name in ("m", "sigma2"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr, dtype=float)
            if arr.shape != pi.shape or not np.all(np.isfinite(arr)):
                raise InvalidArgument(f"{name} must be a finite k x N array")
            object.__setattr__(self, name, arr)
        if self.sigma2 is not None and np.any(self.sigma2 <= 0):
            raise InvalidArgument("variances must be positive")

    @classmethod
    def _unchecked(cls, pi, grid, m=None, sigma2=None) -> "CurveSet":
        # hot-loop constructor; callers guarantee the invariants
        obj = object.__new__(cls)
        for name, val in (("pi", pi), ("grid", grid), ("m", m), ("sigma2", sigma2)):
            object.__setattr__(obj, name, val)
        return obj

    @property
    def k(self) -> int:
        return self.pi.shape[0]

    def at(self, z: np.ndarray) -> dict[str, np.ndarray]:
        """Evaluate every present curve family at ``z`` (n x k arrays)."""
        out = {"pi": interp_rows(self.pi, self.grid, z)}
        if self.m is not None:
            out["m"] = interp_rows(self.m, self.grid, z)
            out["sigma2"] = interp_rows(self.sigma2, self.grid, z)
        return out

    def regrid(self, grid: Grid) -> "CurveSet":
        """Carry the curves over to a new grid by interpolation."""
        pi = interp_rows(self.pi, self.grid, grid.points).T
        pi = pi / pi.sum(axis=0)
        m = s2 = None
        if self.m is not None:
            m = interp_rows(self.m, self.grid, grid.points).T
            s2 = interp_rows(self.sigma2, self.grid, grid.points).T
        return CurveSet(pi, grid, m, s2)


@dataclass(frozen=True)
class Responsibilities:
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2:
            raise InvalidArgument("responsibilities must be n x k")
        if np.any(p < 0) or np.any(p > 1):
            raise InvalidArgument("responsibilities must lie in [0, 1]")
        if not np.allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-10):
            raise InvalidArgument("responsibility rows must sum to one")
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def k(self) -> int:
        return self.p.shape[1]


def log_normal_pdf(y, mean, var):
    return -0.5 * (np.log(2 * np.pi * var) + (y - mean) ** 2 / var)


def mixture_loglik(log_pi: np.ndarray, log_dens: np.ndarray) -> float:
    """Sum over rows of ``log sum_j exp(log_pi + log_dens)``."""
    lw = log_pi + log_dens
    mx = lw.max(axis=1)
    with np.errstate(invalid="ignore"):
        return float(np.sum(mx + np.log(np.exp(lw - mx[:, None]).sum(axis=1))))


def posterior(log_pi: np.ndarray, log_dens: np.ndarray):
    """Normalize ``pi * density`` rows in log space.

    Returns ``(p, row_loglik, n_underflow)``. Rows where every component
    underflows get the uniform assignment ``1/k``.
    """
    lw = log_pi + log_dens
    mx = lw.max(axis=1, keepdims=True)
    bad = ~np.isfinite(mx[:, 0])
    mx[bad] = 0.0
    w = np.exp(lw - mx)
    s = w.sum(axis=1, keepdims=True)
    bad |= ~(s[:, 0] > 0)
    s[bad] = 1.0
    p = w / s
    k = lw.shape[1]
    p[bad] = 1.0 / k
    # renormalize once more so rows sum to one to the last ulp
    p /= p.sum(axis=1, keepdims=True)
    ll = (mx + np.log(s))[:, 0]
    ll[bad] = -np.inf
    return p, ll, int(bad.sum())
