import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from nslab.discrete import (MultiplierSet, Operators, apply_D, apply_Deps, apply_semigroup, default_N, eval_f, eval_g,
                            eval_h, lattice_symbols, phi1, semigroup_multiplier, shift)
from nslab.spectral import SpectralField, to_physical

from conftest import random_real_field

FD = MultiplierSet("finite_difference", 1.0, 0.0, 2.0)


@given(st.floats(-20, 20), st.floats(0, 2), st.floats(0, 2))
def test_g_is_difference_quotient_symbol(y, a, b):
    if a + b < 1e-3:
        return
    ms = MultiplierSet("galerkin", a, b, 2.0)
    ref = (np.exp(1j * a * y) - np.exp(-1j * b * y)) / ((a + b) * y) if y != 0 else 1j
    assert abs(eval_g(ms, y) - ref) < 1e-9


def test_g_series_branch_is_continuous():
    ms = MultiplierSet("galerkin", 1.0, 0.0, 2.0)
    y = np.array([9.99e-6, 1.001e-5])
    v = eval_g(ms, y)
    assert abs(v[0] - v[1]) < 1e-8


def test_f_profile_and_box():
    x = np.array([[0.3, -0.2, 0.1]])
    ref = 4 * np.sum(np.sin(x / 2) ** 2) / np.sum(x**2)
    assert abs(eval_f(FD, x)[0] - ref) < 1e-15
    assert eval_f(FD, np.zeros(3)) == 1.0
    assert math.isinf(eval_f(FD, np.array([2.1, 0.0, 0.0])))
    assert eval_f(FD, np.array([2.0, 0.0, 0.0])) < math.inf        # box is closed
    assert eval_f(MultiplierSet("continuum"), np.array([50.0, 0, 0])) == 1.0


def test_h_is_closed_ball():
    assert eval_h(FD, np.array([1.0, 0, 0])) == 1.0
    assert eval_h(FD, np.array([0.6, 0.6, 0.6])) == 0.0
    assert eval_h(FD, np.array([1.0 + 1e-9, 0, 0])) == 0.0


def test_c_f_is_a_lower_bound():
    R = 3 * FD.L0
    s = np.linspace(-R, R, 41)
    pts = np.stack(np.meshgrid(s, s, s, indexing="ij"), axis=-1)
    vals = FD.profile(pts)
    assert FD.c_f <= vals.min() + 1e-12


def test_multiplier_validation():
    with pytest.raises(ValueError):
        MultiplierSet("spline")
    with pytest.raises(ValueError):
        MultiplierSet("galerkin", 0.0, 0.0)
    with pytest.raises(ValueError):
        MultiplierSet("finite_difference", 1, 0, 2.2)


def test_Deps_is_shift_difference():
    u = random_real_field(4, seed=3)
    eps = 0.3
    for ms in (FD, MultiplierSet("galerkin", 0.5, 1.5, 2.0)):
        for j in range(3):
            e = np.eye(3)[j]
            ref = (shift(u, ms.a * eps * e) - shift(u, -ms.b * eps * e)) / ((ms.a + ms.b) * eps)
            assert (apply_Deps(u, j, eps, ms) - ref).max_abs() < 1e-12


def test_shift_translates_grid_values():
    u = random_real_field(3, seed=4)
    M = 7
    s = 2 * math.pi / M * np.array([1, 0, 2])
    a = to_physical(shift(u, s), M)
    b = np.roll(to_physical(u, M), (-1, 0, -2), axis=(0, 1, 2))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_central_difference_converges_to_derivative():
    ms = MultiplierSet("galerkin", 1.0, 1.0, 2.0)
    u = SpectralField.from_modes(3, {(1, 2, 0): 1.0})
    errs = [(apply_Deps(u, 1, e, ms) - apply_D(u, 1)).max_abs() for e in (0.1, 0.05)]
    assert 3.5 < errs[0] / errs[1] < 4.5                           # second order


@given(st.floats(0, 1), st.floats(0, 1))
def test_semigroup_property(t, s):
    lam = lattice_symbols(4, 0.3, FD)["lam"]
    lhs = semigroup_multiplier(lam, t) * semigroup_multiplier(lam, s)
    assert np.max(np.abs(lhs - semigroup_multiplier(lam, t + s))) < 1e-12


def test_blocked_modes_vanish_after_any_positive_time():
    u = random_real_field(6, seed=1)
    eps = 0.5
    out = apply_semigroup(u, 1e-9, eps, FD)
    blocked = lattice_symbols(6, eps, FD)["blocked"]
    assert blocked.any()
    assert np.all(out.coeffs[blocked] == 0)
    assert (apply_semigroup(u, 0.0, eps, FD) - u).max_abs() == 0
    with pytest.raises(ValueError):
        semigroup_multiplier(np.ones(3), -1.0)


def test_phi1_is_integral_of_semigroup():
    for lam in (0.0, 0.3, 50.0):
        ref = integrate.quad(lambda s: math.exp(-lam * s), 0, 0.07)[0]
        assert abs(phi1(np.array([lam]), 0.07)[0] - ref) < 1e-14
    assert phi1(np.array([np.inf]), 0.1)[0] == 0.0


def test_etd_step_exact_for_constant_source():
    ops = Operators.approx(3, 0.4, FD)
    u0 = random_real_field(3, seed=7)
    F = random_real_field(3, seed=8)
    u = u0
    for _ in range(4):
        u = ops.etd_step(u, F, 0.025)
    lam = ops.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.exp(-lam * 0.1) * u0.coeffs + np.where(lam > 0, -np.expm1(-lam * 0.1) / lam, 0.1) * F.coeffs
    exact = np.where(np.isinf(lam), 0.0, exact)
    assert np.max(np.abs(u.coeffs - exact)) < 1e-12


def test_default_N_matches_box():
    assert default_N(0.1, FD) == 20
    assert default_N(0.4, FD) == 5
