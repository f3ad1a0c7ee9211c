import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dispersive_modes.grid import GridSpec, SpatialField, SpectralField, apply_symbol, forward, inverse, l2_norm, sample
from dispersive_modes.oracle import dft_direct


def test_grid_geometry():
    g = GridSpec(64, 2 * math.pi)
    assert g.x[0] == -math.pi and g.k[0] == -32 and g.k[-1] == 31
    assert_allclose(g.dx * g.dk * g.n, 2 * math.pi)
    assert np.all(np.diff(g.k) > 0)
    with pytest.raises(ValueError):
        GridSpec(48, 1.0)
    with pytest.raises(ValueError):
        GridSpec(4, 1.0)


def test_constant_field_is_dc():
    g = GridSpec(32, 10.0)
    s = forward(SpatialField(g, np.ones(32)))
    expect = np.zeros(32, dtype=complex)
    expect[16] = 10.0 / math.sqrt(2 * math.pi)
    assert_allclose(s.values, expect, atol=1e-12 * 10)
    assert_allclose(inverse(s).values, 1.0, atol=1e-14)


def test_gaussian_pair():
    g = GridSpec(512, 40.0)
    s = forward(sample(g, lambda x, t: np.exp(-(x**2) / 2)))
    assert np.max(np.abs(s.values - np.exp(-(g.k**2) / 2))) < 1e-10


def test_single_harmonic():
    g = GridSpec(64, 20.0)
    k5 = g.k[32 + 5]
    s = forward(sample(g, lambda x, t: np.exp(1j * k5 * x)))
    expect = np.zeros(64, dtype=complex)
    expect[37] = 20.0 / math.sqrt(2 * math.pi)
    assert_allclose(s.values, expect, atol=1e-12)


def test_fields_are_immutable():
    g = GridSpec(8, 1.0)
    f = SpatialField(g, np.zeros(8))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        SpatialField(g, np.zeros(7))


fields = st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), min_size=64, max_size=64)


@settings(max_examples=40, deadline=None)
@given(fields, st.floats(0.5, 100.0))
def test_round_trip_and_parseval(vals, length):
    g = GridSpec(64, length)
    u = SpatialField(g, np.array(vals))
    s = forward(u)
    scale = max(np.max(np.abs(u.values)), 1e-300)
    assert np.max(np.abs(inverse(s).values - u.values)) <= 1e-12 * scale
    assert_allclose(l2_norm(g, u.values, "x") ** 2, l2_norm(g, s.values, "k") ** 2, rtol=1e-12, atol=1e-300)


@settings(max_examples=30, deadline=None)
@given(fields, fields, st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_linearity(a, b, alpha):
    g = GridSpec(64, 7.0)
    a, b = np.array(a), np.array(b)
    lhs = forward(SpatialField(g, a + alpha * b)).values
    rhs = forward(SpatialField(g, a)).values + alpha * forward(SpatialField(g, b)).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * (1 + np.max(np.abs(lhs)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=32, max_size=32))
def test_hermitian_symmetry_of_real_fields(vals):
    g = GridSpec(32, 3.0)
    s = forward(SpatialField(g, np.array(vals))).values
    # bin j <-> -k_j is index N - j; the Nyquist bin (index 0) pairs with itself
    scale = 1e-12 * (1 + np.max(np.abs(s)))
    assert np.max(np.abs(s[1:] - np.conj(s[1:][::-1]))) <= scale
    assert abs(s[0].imag) <= scale


def test_fast_matches_direct_sum():
    rng = np.random.default_rng(1)
    for n in (8, 64, 256):
        g = GridSpec(n, 13.0)
        u = SpatialField(g, rng.normal(size=n) + 1j * rng.normal(size=n))
        fast, direct = forward(u).values, dft_direct(u).values
        assert np.max(np.abs(fast - direct)) <= 1e-12 * np.max(np.abs(direct))


def test_apply_symbol():
    g = GridSpec(256, 40.0)
    u = sample(g, lambda x, t: np.exp(-(x**2) / 2))
    s = forward(u)
    assert_allclose(apply_symbol(np.ones(256), s).values, s.values)
    du = inverse(apply_symbol(lambda k: 1j * k, s)).values
    assert np.max(np.abs(du - (-g.x * np.exp(-(g.x**2) / 2)))) < 1e-8
    g1 = lambda k: np.exp(-0.3j * k)
    g2 = lambda k: k**2
    # equal per bin up to the rounding of one extra multiplication
    assert_allclose(apply_symbol(g2, apply_symbol(g1, s)).values, apply_symbol(lambda k: g1(k) * g2(k), s).values, rtol=1e-15, atol=0)


def test_apply_symbol_shift():
    g = GridSpec(64, 2 * math.pi)
    k0, c, t = 3.0, 1.0, 0.7
    s = forward(sample(g, lambda x, _: np.exp(1j * k0 * x)))
    out = inverse(apply_symbol(lambda k: np.exp(-1j * c * k * t), s)).values
    assert_allclose(out, np.exp(1j * k0 * (g.x - c * t)), atol=1e-12)


def test_apply_symbol_rejects_non_finite():
    g = GridSpec(16, 1.0)
    s = SpectralField(g, np.ones(16))
    with pytest.raises(ValueError, match="bin 8"), np.errstate(divide="ignore"):
        apply_symbol(lambda k: 1.0 / k, s)
