import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from simixreg.core import DegenerateWindowError, InvalidArgument
from simixreg.kernels import KernelSpec, kernel_weight, local_proportions, weight_matrix, weighted_mean


@pytest.mark.parametrize("h, t, expected", [(1.0, 0.0, 0.75), (1.0, 1.0, 0.0), (0.5, 0.0, 1.5)])
def test_epanechnikov_values(h, t, expected):
    assert kernel_weight(KernelSpec("epanechnikov", h), t) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("family", ["epanechnikov", "quartic"])
@pytest.mark.parametrize("h", [0.05, 0.3, 2.0])
def test_kernel_integrates_to_one(family, h):
    t = np.linspace(-h, h, 200001)
    w = kernel_weight(KernelSpec(family, h), t)
    assert np.all(w >= 0)
    assert np.trapezoid(w, t) == pytest.approx(1.0, abs=1e-6)


def test_kernel_support():
    spec = KernelSpec("quartic", 0.2)
    assert kernel_weight(spec, 0.2) == 0
    assert kernel_weight(spec, -0.3) == 0
    assert kernel_weight(spec, 0.0) == pytest.approx(15 / 16 / 0.2)


def test_kernel_spec_validation():
    with pytest.raises(InvalidArgument):
        KernelSpec("gaussian", 0.1)
    with pytest.raises(InvalidArgument):
        KernelSpec(h=0.0)
    assert KernelSpec().with_bandwidth(0.3).h == 0.3


def test_weighted_mean_hand_example():
    spec = KernelSpec("epanechnikov", 2.0)
    w = kernel_weight(spec, np.array([-1.0, 0.0, 1.0]))
    np.testing.assert_allclose(w, np.array([0.5625, 0.75, 0.5625]) / 2)
    assert weighted_mean([2, 4, 8], w) == pytest.approx(4.6, abs=1e-14)


def test_weighted_mean_trivial_cases():
    assert weighted_mean([1, 2], [1, 1]) == 1.5
    assert weighted_mean([1, 7, 3], [0, 2, 0]) == 7
    with pytest.raises(DegenerateWindowError):
        weighted_mean([1, 2], [0, 0])
    with pytest.raises(InvalidArgument):
        weighted_mean([1, 2], [1, -1])


pairs = st.integers(1, 20).flatmap(
    lambda n: st.tuples(
        arrays(float, n, elements=st.floats(-1e3, 1e3)),
        arrays(float, n, elements=st.floats(0, 1e3)),
    )
)


@given(pairs, st.floats(1e-3, 1e3))
def test_weighted_mean_bounded_and_scale_invariant(vw, c):
    v, w = vw
    assume(w.sum() > 1e-6)
    m = weighted_mean(v, w)
    assert v.min() - 1e-9 <= m <= v.max() + 1e-9
    assert weighted_mean(v, c * w) == pytest.approx(m, rel=1e-9, abs=1e-9)


def test_local_proportions_empty_window_names_location():
    spec = KernelSpec(h=0.1)
    W = weight_matrix(spec, np.array([0.0, 0.05]), np.array([0.0, 1.0]))
    with pytest.raises(DegenerateWindowError, match="u=1"):
        local_proportions(W, np.full((2, 2), 0.5), 1e-6, np.array([0.0, 1.0]))


def test_local_proportions_clamps_and_sums_to_one():
    W = np.ones((3, 4))
    P = np.array([[1.0, 0.0]] * 4)
    pi = local_proportions(W, P, 1e-3, None)
    np.testing.assert_allclose(pi.sum(axis=1), 1, atol=1e-15)
    assert pi.min() > 0
