import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haargreedy.haar import (
    DyadicFunction,
    HaarCoefficients,
    HaarDictionary,
    analyze,
    haar_as_dyadic,
    haar_index_decompose,
    haar_norm,
    lp_norm,
    required_level,
    synthesize,
    truncation_norm_check,
)


def haar_at(i, x):
    """Pointwise Haar function, written from the definition."""
    if i == 0:
        return 1.0
    n = int(math.floor(math.log2(i)))
    k = i - 2**n
    a, mid, b = k / 2**n, (k + 0.5) / 2**n, (k + 1) / 2**n
    if a <= x < mid:
        return 1.0
    if mid <= x < b:
        return -1.0
    return 0.0


def midpoints(level):
    return (np.arange(2**level) + 0.5) / 2**level


@pytest.mark.parametrize("i,expected", [(1, (0, 0)), (2, (1, 0)), (3, (1, 1)), (4, (2, 0)), (7, (2, 3)), (8, (3, 0))])
def test_index_decompose(i, expected):
    assert haar_index_decompose(i) == expected


def test_index_decompose_rejects_constant():
    with pytest.raises(ValueError):
        haar_index_decompose(0)


@pytest.mark.parametrize("i", range(0, 20))
def test_haar_pattern_matches_pointwise_definition(i):
    level = 6
    f = haar_as_dyadic(i, level)
    expected = [haar_at(i, x) for x in midpoints(level)]
    np.testing.assert_array_equal(f.values, expected)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 7.5])
@pytest.mark.parametrize("i", [0, 1, 2, 3, 5, 9, 17])
def test_haar_norm_is_support_length_power(p, i):
    # ||h_i||_p^p = measure of the support = 2^-n
    f = haar_as_dyadic(i, 6)
    assert lp_norm(f, p) == pytest.approx(haar_norm(i, p), rel=1e-14)
    n = 0 if i == 0 else haar_index_decompose(i)[0]
    assert haar_norm(i, p) == pytest.approx(2.0 ** (-n / p), rel=1e-15)


def test_required_level():
    assert required_level([0]) == 0
    assert required_level([0, 1]) == 1
    assert required_level(range(8)) == 3
    assert required_level(range(9)) == 4


def test_dyadic_refine_preserves_integral_and_norm():
    rng = np.random.default_rng(1)
    f = DyadicFunction(3, rng.standard_normal(8))
    g = f.refine(6)
    assert g.integral() == pytest.approx(f.integral(), rel=1e-14)
    assert lp_norm(g, 3.0) == pytest.approx(lp_norm(f, 3.0), rel=1e-14)


def test_dyadic_arithmetic_refines():
    f = DyadicFunction.constant(2.0)
    g = haar_as_dyadic(3, 2)
    h = f - g * 0.5
    assert h.level == 2
    np.testing.assert_allclose(h.values, [2.0, 2.0, 1.5, 2.5])
    assert (-h + h).is_zero()


def test_dyadic_rejects_bad_length():
    with pytest.raises(ValueError):
        DyadicFunction(2, np.zeros(3))


def test_lp_norm_matches_direct_sum():
    rng = np.random.default_rng(2)
    v = rng.standard_normal(16)
    p = 2.7
    expected = (np.sum(np.abs(v) ** p) / 16) ** (1 / p)
    assert lp_norm(DyadicFunction(4, v), p) == pytest.approx(expected, rel=1e-13)


def test_lp_norm_scale_safe():
    v = np.array([1e-200, 3e-200])
    assert lp_norm(DyadicFunction(1, v), 4.0) > 0
    w = np.array([1e200, 3e200])
    assert math.isfinite(lp_norm(DyadicFunction(1, w), 4.0))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_dictionary_analysis_is_biorthogonal(p):
    d = HaarDictionary.initial_segment(12, p)
    gram = d.analysis @ d.synthesis.T * d.weight
    np.testing.assert_allclose(gram, np.eye(d.size), atol=1e-13)


@pytest.mark.parametrize("p", [1.5, 4.0])
def test_dictionary_elements_have_unit_norm(p):
    d = HaarDictionary.initial_segment(9, p)
    np.testing.assert_allclose(d.norms_array(d.synthesis), 1.0, rtol=1e-14)


def test_dictionary_requires_increasing_indices():
    with pytest.raises(ValueError):
        HaarDictionary([0, 2, 1], 2.0)
    with pytest.raises(ValueError):
        HaarDictionary([], 2.0)
    with pytest.raises(ValueError):
        HaarDictionary([0, 1], 1.0)


def test_sparse_dictionary_positions():
    d = HaarDictionary([1, 5, 6], 3.0)
    assert d.level == 3 and d.size == 3
    c = HaarCoefficients(d.indices, [1.0, -2.0, 0.5])
    np.testing.assert_allclose(d.synthesize_array(c.coeffs), synthesize(c, 3.0).values)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=17),
    st.sampled_from([1.3, 2.0, 3.5]),
)
def test_analyze_inverts_synthesize(coeffs, p):
    c = HaarCoefficients.initial_segment(coeffs)
    back = analyze(synthesize(c, p), c.indices, p)
    scale = max(1.0, max(abs(v) for v in coeffs))
    np.testing.assert_allclose(back.coeffs, c.coeffs, atol=1e-12 * scale)


def test_haar_coefficients_validation():
    with pytest.raises(ValueError):
        HaarCoefficients((0, 1), [1.0])
    u = HaarCoefficients.unit((0, 1, 2), 1)
    assert list(u.coeffs) == [0.0, 1.0, 0.0]
    assert HaarCoefficients.zeros((0, 1)).is_zero()


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=16),
    st.integers(1, 15),
    st.sampled_from([1.2, 1.5, 2.0, 3.0, 6.0]),
)
def test_truncation_never_increases_norm(coeffs, i0, p):
    i0 = min(i0, len(coeffs) - 1)
    truncated, full = truncation_norm_check(HaarCoefficients.initial_segment(coeffs), i0, p)
    assert truncated <= full * (1 + 1e-12)
    if all(v == 0 for v in coeffs[i0:]):
        assert truncated == full


def test_truncation_strict_for_nonzero_tail():
    t, f = truncation_norm_check(HaarCoefficients.initial_segment([1.0, 0.0, 0.0, 1e-6]), 2, 3.0)
    assert t < f


def test_truncation_cut_range():
    c = HaarCoefficients.initial_segment([1.0, 2.0])
    with pytest.raises(ValueError):
        truncation_norm_check(c, 0, 2.0)
    with pytest.raises(ValueError):
        truncation_norm_check(c, 2, 2.0)
