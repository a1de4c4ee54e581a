import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nslab.discrete import MultiplierSet, eval_f, eval_g, eval_h
from nslab.renorm import (RenormTable, UnavailableCounterterm, build_table, compute_C, compute_C0, compute_C3,
                          compute_C3_bar, compute_C_bar, compute_Lambda, compute_second_order, support_modes)

FD = MultiplierSet("finite_difference", 1.0, 0.0, 2.0)
SYM = MultiplierSet("finite_difference", 1.0, 1.0, 2.0)


def lattice(eps, ms):
    R = int(ms.h_radius / eps) + 1
    for k in itertools.product(range(-R, R + 1), repeat=3):
        k = np.array(k, float)
        if not k.any() or eval_h(ms, eps * k) == 0:
            continue
        q = k @ k
        P = np.eye(3) - np.outer(k, k) / q
        yield k, q, float(eval_f(ms, eps * k)), float(eval_h(ms, eps * k)), P


def C_by_loops(eps, t, ms):
    """Lattice sums written index by index from the defining formulas."""
    a, b = ms.a, ms.b
    C = np.zeros((3, 3, 3))
    Ct = np.zeros((3, 3, 3))
    for k, q, f, h, P in lattice(eps, ms):
        w = (1 - math.exp(-2 * q * t * f)) * h**2 / (8 * (a + b) * q**2 * f**2) / eps / (2 * math.pi) ** 3
        for i, i1, j, i2, i3 in itertools.product(range(3), repeat=5):
            C[i, i1, j] += w * (math.cos(a * eps * k[i2]) - math.cos(b * eps * k[i2])) * P[i, i1] * P[i2, i3] * P[j, i3]
            Ct[i, i1, j] += w * (math.cos(a * eps * k[i1]) - math.cos(b * eps * k[i1])) * P[i, i2] * P[i2, i3] * P[j, i3]
    return C, Ct


def C3t_by_loops(eps, t, ms):
    out = np.zeros((3, 3, 3, 3), complex)
    for k, q, f, h, P in lattice(eps, ms):
        lam = q * f
        T = (1 - math.exp(-2 * lam * t)) / (2 * lam) * h**2 / (2 * q * f) / (2 * math.pi) ** 3
        for i1, j0, j1, i2, i3 in itertools.product(range(3), repeat=5):
            g = k[j0] * complex(eval_g(ms, eps * k[j0]))
            out[i1, j0, j1, i2] += T * g * P[i1, i2] * P[i2, i3] * P[j1, i3]
    return out


def test_C0_by_loops():
    eps = 0.4
    C0, C0b = compute_C0(eps, FD)
    ref = np.zeros((3, 3))
    refb = np.zeros((3, 3))
    for k, q, f, h, P in lattice(eps, FD):
        ref += h**2 / (2 * q * f) * P / (2 * math.pi) ** 3
        refb += h**2 / (2 * q) * P / (2 * math.pi) ** 3
    np.testing.assert_allclose(C0, ref, rtol=1e-12, atol=1e-16)
    np.testing.assert_allclose(C0b, refb, rtol=1e-12, atol=1e-16)
    # isotropy of the ball and the cubic profile make C0 a multiple of the identity
    np.testing.assert_allclose(C0, C0[0, 0] * np.eye(3), atol=1e-15)


@pytest.mark.parametrize("t", [0.1, 1.0])
def test_C_by_loops(t):
    C, Ct = compute_C(0.4, t, FD)
    rC, rCt = C_by_loops(0.4, t, FD)
    np.testing.assert_allclose(C, rC, atol=1e-15)
    np.testing.assert_allclose(Ct, rCt, atol=1e-15)


def test_C3_tilde_by_loops():
    _, C3t = compute_C3(0.4, 0.3, FD)
    ref = C3t_by_loops(0.4, 0.3, FD)
    assert np.max(np.abs(ref.imag)) < 1e-15
    np.testing.assert_allclose(C3t, ref.real, atol=1e-15)


@given(st.sampled_from([0.4, 0.2, 0.1]), st.floats(0.01, 2.0))
def test_C3_sums_to_twice_C(eps, t):
    C, Ct = compute_C(eps, t, FD)
    C3, C3t = compute_C3(eps, t, FD)
    assert np.max(np.abs(C3.sum(axis=3) - 2 * C)) < 1e-10
    assert np.max(np.abs(C3t.sum(axis=3) - 2 * Ct)) < 1e-10


def test_exact_semigroup_constants_vanish():
    assert np.max(np.abs(compute_C_bar(0.2, 1.0, FD))) < 1e-15
    assert np.max(np.abs(compute_C3_bar(0.2, 1.0, FD))) < 1e-15


def test_symmetric_stencil_cancels_first_order_constants():
    C, Ct = compute_C(0.2, 1.0, SYM)
    assert np.max(np.abs(C)) == 0 and np.max(np.abs(Ct)) == 0
    assert np.max(np.abs(compute_Lambda(SYM).value)) == 0


def test_lambda_limits_and_ladder():
    Lam = compute_Lambda(FD).value
    Lam1 = compute_Lambda(FD, "Lambda1").value
    assert np.max(np.abs(Lam)) > 1e-5
    d = [np.max(np.abs(compute_C(e, 1.0, FD)[0] - Lam)) for e in (0.2, 0.1, 0.05)]
    d1 = [np.max(np.abs(compute_C(e, 1.0, FD)[1] - Lam1)) for e in (0.2, 0.1, 0.05)]
    assert d[0] > d[1] > d[2]
    assert d1[0] > d1[1] > d1[2]
    # first order in eps
    assert 1.7 < d[0] / d[1] < 2.3 and 1.7 < d[1] / d[2] < 2.3
    with pytest.raises(ValueError):
        compute_Lambda(FD, "Lambda2")


@pytest.mark.parametrize("which", ["Lambda", "Lambda1"])
def test_lambda_cubic_symmetry(which):
    # the integrand is invariant under permuting axes and under x_l -> -x_l;
    # the summed index sits inside the cosine, so only reflections of the
    # free indices give sign constraints
    L = compute_Lambda(FD, which).value
    for perm in itertools.permutations(range(3)):
        Lp = L[np.ix_(perm, perm, perm)]
        np.testing.assert_allclose(Lp, L, atol=1e-12)
    for i, i1, j in itertools.product(range(3), repeat=3):
        if len({i, i1, j}) == 3:
            assert abs(L[i, i1, j]) < 1e-14
    if which == "Lambda1":
        off = [L[i, i1, j] for i, i1, j in itertools.product(range(3), repeat=3) if i != j]
        assert np.max(np.abs(off)) < 1e-14
    # an all-equal index triple (odd count of one coordinate) is not zero
    assert abs(L[0, 0, 0]) > 1e-5


def test_constants_saturate_in_time():
    C1, _ = compute_C(0.4, 5.0, FD)
    C2, _ = compute_C(0.4, 50.0, FD)
    np.testing.assert_allclose(C1, C2, atol=1e-17)
    C0, _ = compute_C(0.4, 0.0, FD)
    assert np.max(np.abs(C0)) == 0


def test_support_modes_are_ordered_and_in_ball():
    m = support_modes(0.4, FD)
    assert np.all(np.sum((0.4 * m.K) ** 2, axis=1) <= 1 + 1e-12)
    assert len(m.K) == m.n
    keys = [tuple(k) for k in m.K]
    assert keys == sorted(keys)


def test_table_and_unavailable_counterterm():
    tab = build_table(0.4, 0.5, FD, second_order=False)
    assert isinstance(tab, RenormTable)
    res = tab.identity_residuals()
    assert res["C3_sum_minus_2C"] < 1e-10
    with pytest.raises(UnavailableCounterterm):
        tab.C12


def test_second_order_residuals_decay_in_time():
    early = compute_second_order(0.5, 0.05, FD)
    late = compute_second_order(0.5, 5.0, FD)
    assert np.max(np.abs(late.phi2)) < 1e-3 * np.max(np.abs(early.phi2))
    assert np.max(np.abs(late.phi11)) < 1e-3 * max(np.max(np.abs(early.phi11)), 1e-300) or \
        np.max(np.abs(late.phi11)) < 1e-15
    assert early.C2.shape == (3, 3)
