import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simixreg.core import Dataset, InvalidArgument, NumericalRankError, normalize_index
from simixreg.sir import SirConfig, sir_direction, slice_labels


def angle(a, b):
    c = abs(float(np.dot(a, b))) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(min(c, 1.0)))


def sir_oracle(x, y, H=10):
    """SIR by explicit summation with Cholesky whitening."""
    n, p = x.shape
    mu = [sum(x[i, j] for i in range(n)) / n for j in range(p)]
    cov = np.zeros((p, p))
    for i in range(n):
        d = x[i] - mu
        cov += np.outer(d, d)
    cov /= n
    L = np.linalg.cholesky(cov)
    Linv = np.linalg.inv(L)
    order = sorted(range(n), key=lambda i: (y[i], i))
    bounds = np.linspace(0, n, H + 1)
    M = np.zeros((p, p))
    for s in range(H):
        rows = order[int(round(bounds[s])) : int(round(bounds[s + 1]))]
        m = np.zeros(p)
        for i in rows:
            m += Linv @ (x[i] - mu)
        m /= len(rows)
        M += len(rows) / n * np.outer(m, m)
    w, v = np.linalg.eigh(M)
    return Linv.T @ v[:, -1]


def test_p1_returns_one(rng):
    ds = Dataset(rng.normal(size=(50, 1)), rng.normal(size=50))
    np.testing.assert_array_equal(sir_direction(ds).alpha, [1.0])


def test_recovers_linear_direction(rng):
    x = rng.normal(size=(2000, 3))
    a = sir_direction(Dataset(x, x[:, 0]))
    assert angle(a.alpha, [1, 0, 0]) < 0.05


def test_matches_direct_summation_oracle(rng):
    x = rng.normal(size=(400, 3)) @ np.array([[1, 0.3, 0], [0, 1, 0.2], [0, 0, 1.5]])
    y = np.sin(x @ np.array([1.0, 2.0, -1.0])) + 0.5 * x[:, 0] + 0.1 * rng.normal(size=400)
    got = sir_direction(Dataset(x, y)).alpha
    want = normalize_index(sir_oracle(x, y)).alpha
    np.testing.assert_allclose(got, want, atol=1e-8)


def test_permutation_equivariance(rng):
    x = rng.normal(size=(600, 4))
    y = x @ np.array([1.0, -0.5, 2.0, 0.3]) + 0.1 * rng.normal(size=600)
    base = sir_direction(Dataset(x, y)).alpha
    perm = [2, 0, 3, 1]
    permuted = sir_direction(Dataset(x[:, perm], y)).alpha
    np.testing.assert_allclose(permuted, normalize_index(base[perm]).alpha, atol=1e-10)


def test_linear_map_equivariance(rng):
    x = rng.normal(size=(2000, 3))
    y = np.exp(x @ np.array([1.0, 1.0, 0.0]) / 2)
    A = np.array([[2.0, 0.5, 0.0], [0.0, 1.0, -0.7], [0.3, 0.0, 1.2]])
    a_x = sir_direction(Dataset(x, y)).alpha
    a_ax = sir_direction(Dataset(x @ A.T, y)).alpha
    expected = normalize_index(np.linalg.solve(A.T, a_x)).alpha
    assert angle(a_ax, expected) < 0.05


def test_deterministic_with_ties(rng):
    x = rng.normal(size=(300, 3))
    y = np.round(x[:, 1], 1)
    ds = Dataset(x, y)
    assert np.array_equal(sir_direction(ds).alpha, sir_direction(ds).alpha)


def test_errors(rng):
    with pytest.raises(InvalidArgument):
        sir_direction(Dataset(rng.normal(size=(19, 2)), rng.normal(size=19)))
    x = rng.normal(size=(100, 2))
    with pytest.raises(NumericalRankError):
        sir_direction(Dataset(np.column_stack([x[:, 0], x[:, 0]]), x[:, 1]), SirConfig(ridge=0.0))
    with pytest.raises(InvalidArgument):
        SirConfig(n_slices=1)


@given(st.integers(20, 200), st.integers(2, 10))
def test_slices_partition_rows(n, H):
    y = np.random.default_rng(n).normal(size=n)
    labels = slice_labels(y, H)
    counts = np.bincount(labels, minlength=H)
    assert counts.sum() == n and counts.max() - counts.min() <= 1
    order = np.argsort(y, kind="stable")
    assert np.all(np.diff(labels[order]) >= 0)
