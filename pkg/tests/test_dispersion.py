import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dispersive_modes.dispersion import (
    DegenerateLeadingCoefficient,
    DispersionTable,
    build_table,
    dispersion_poly,
    group_velocity,
    root_residual,
    solve_roots,
)
from dispersive_modes.equation import LinearOperator, parse_operator
from dispersive_modes.grid import GridSpec

WAVE = "u_xx - (1/c^2)*u_tt = 0"


def test_standard_wave_polynomial_and_roots():
    p = dispersion_poly(parse_operator(WAVE, {"c": 2.0}), 3.0)
    assert_allclose(p, [-9, 0, 0.25], atol=1e-15)
    assert_allclose(solve_roots(p), [-6, 6])


def test_single_mode_roots():
    p = dispersion_poly(parse_operator("u_t = i*g*u_xx", {"g": 0.5}), 2.0)
    # proportional to [2i, -i]
    assert_allclose(p / p[1], [2j / -1j, 1])
    assert_allclose(solve_roots(p), [2])
    kdv = parse_operator("nu*u_xxx + c0*u_x = -u_t", {"nu": 0.1, "c0": 1.0})
    assert_allclose(solve_roots(dispersion_poly(kdv, 2.0)), [1.2])


def test_beam_roots_follow_operator():
    op = parse_operator("u_xxxx = -(1/gamma^2)*u_tt", {"gamma": 1.5})
    assert_allclose(solve_roots(dispersion_poly(op, 2.0)), [-6, 6])


def test_leading_coefficient_drop():
    # A_1(k) = 1 + (ik)^2 vanishes at k = 1
    op = LinearOperator({(0, 1): 1.0, (2, 1): 1.0, (0, 0): 1.0})
    with pytest.raises(DegenerateLeadingCoefficient) as err:
        dispersion_poly(op, 1.0)
    assert err.value.k == 1.0


def test_standard_wave_table():
    g = GridSpec(64, 2 * math.pi)
    t = build_table(parse_operator(WAVE, {"c": 1.0}), g)
    assert_allclose(t.branches[0], g.k, atol=1e-12)
    assert_allclose(t.branches[1], -g.k, atol=1e-12)
    assert list(np.flatnonzero(t.degenerate_bins)) == [32]
    assert t.degenerate_mask[0, 1, 32] and t.degenerate_mask[1, 0, 32]


def test_boussinesq_table():
    g = GridSpec(128, 40.0)
    t = build_table(parse_operator("u_tt - c^2*u_xx - beta^2*u_xxtt = 0", {"c": 1.0, "beta": 1.0}), g)
    expect = g.k / np.sqrt(1 + g.k**2)
    assert_allclose(t.branches[0], expect, atol=1e-12)
    assert_allclose(t.branches[1], -expect, atol=1e-12)


def test_schrodinger_table():
    g = GridSpec(64, 20.0)
    t = build_table(parse_operator("u_t = i*g*u_xx", {"g": 0.5}), g)
    assert t.n_modes == 1
    assert_allclose(t.branches[0], 0.5 * g.k**2, atol=1e-12)
    assert not np.any(t.degenerate_bins)


def test_group_velocity():
    g = GridSpec(256, 40.0)
    wave = build_table(parse_operator(WAVE, {"c": 1.0}), g)
    assert all(abs(group_velocity(wave, 0, j) - 1) < 1e-12 for j in range(1, 255))
    j = int(np.argmin(abs(g.k - 1.0)))
    sch = build_table(parse_operator("u_t = i*g*u_xx", {"g": 0.5}), g)
    assert abs(group_velocity(sch, 0, j) - g.k[j]) < 1e-12
    j2 = int(np.argmin(abs(g.k - 2.0)))
    kdv = build_table(parse_operator("nu*u_xxx + c0*u_x = -u_t", {"nu": 0.1, "c0": 1.0}), g)
    # the central difference of nu k^3 is off by exactly nu dk^2
    assert abs(group_velocity(kdv, 0, j2) - (1 - 0.3 * g.k[j2] ** 2)) <= 0.1 * g.dk**2 + 1e-12
    with pytest.raises(IndexError):
        group_velocity(wave, 0, 0)
    with pytest.raises(IndexError):
        group_velocity(wave, 2, 5)


def test_table_is_deterministic():
    g = GridSpec(128, 30.0)
    op = parse_operator("u_ttt + u_xxt + u_x = 0")
    a, b = build_table(op, g), build_table(op, g)
    assert np.array_equal(a.branches, b.branches)
    assert np.array_equal(a.degenerate_mask, b.degenerate_mask)


def _random_operator(draw_coeffs, nt):
    terms = {(m, n): c for (m, n), c in draw_coeffs.items() if n < nt}
    terms[(0, nt)] = -1.0
    return LinearOperator(terms)


real_coef = st.floats(-3, 3).filter(lambda v: abs(v) > 1e-2)


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 2)), real_coef, max_size=5), st.integers(1, 3))
def test_roots_are_complete_and_continuous(coeffs, nt):
    op = _random_operator(coeffs, nt)
    g = GridSpec(32, 10.0)
    t = build_table(op, g)
    # completeness: the product over branches reproduces the polynomial
    for j in range(g.n):
        p = dispersion_poly(op, g.k[j])
        rebuilt = np.poly(t.branches[:, j])[::-1] * p[-1]
        assert np.max(np.abs(rebuilt - p)) <= 1e-8 * np.max(np.abs(p))
        assert np.all(root_residual(p, t.branches[:, j]) < 1e-10)
    # continuity: each step is a minimal-cost permutation
    perms = list(itertools.permutations(range(nt)))
    for step in (1, -1):
        j = t.seed_index + step
        while 0 <= j < g.n:
            prev, cur = t.branches[:, j - step], t.branches[:, j]
            chosen = np.sum(np.abs(cur - prev))
            best = min(np.sum(np.abs(cur[list(p)] - prev)) for p in perms)
            assert chosen <= best + t.eps_deg_abs * nt + 1e-12
            j += step


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 2)), real_coef, max_size=5), st.integers(1, 3))
def test_conjugate_symmetry_for_real_operators(coeffs, nt):
    op = _random_operator(coeffs, nt)
    g = GridSpec(16, 10.0)
    t = build_table(op, g)
    perms = [list(p) for p in itertools.permutations(range(nt))]
    for j in range(1, g.n):
        mirror = g.n - j  # k_{mirror} = -k_j
        here = -np.conj(t.branches[:, j])
        there = t.branches[:, mirror]
        mismatch = min(np.max(np.abs(here[p] - there)) for p in perms)
        assert mismatch <= 1e-9 * (1 + np.max(np.abs(there)))


def test_synthetic_table():
    t = DispersionTable.from_branches(np.arange(4.0), [[1, 1, 2, 3], [1, 0, 0, 0]])
    assert list(t.degenerate_bins) == [True, False, False, False]
    assert t.labels() == ["omega_1", "omega_2"]
