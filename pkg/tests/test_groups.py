from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branchlab import groups
from branchlab.groups import (
    INF,
    BK_spec,
    Bop_spec,
    CapExceeded,
    GroupElement,
    K_spec,
    Monomial,
    NotInSubgroup,
    Product,
    Torus,
    canonical_lift,
    center_spec,
    conj_by_monomial,
    decode,
    decompose_Bop_T,
    double_coset_verify,
    encode,
    factor_B_Kd,
    is_unitary_array,
    mat_inv_unitary,
    mat_mul,
    moy_prasad_spec,
    mp_isomorphism,
    principal_congruence,
    quotient_enumerate,
    quotient_order,
    transversal,
)
from branchlab.scalars import make_params

W = np.zeros((2, 2, 2), dtype=np.int64)
W[0, 1, 0] = W[1, 0, 0] = 1


def test_enumeration_orders(P3):
    for L in (1, 2):
        assert len(quotient_enumerate(K_spec(), L, P3)) == quotient_order(P3, L)
    assert quotient_order(P3, 1) == 96
    assert quotient_order(make_params(5, 1), 1) == 720


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 7775), st.integers(0, 7775))
def test_products_and_inverses_stay_unitary(i, j):
    par = make_params(3, 2)
    K = quotient_enumerate(K_spec(), 2, par)
    P = 9
    g = mat_mul(K[i], K[j], par.epsilon, P)
    assert is_unitary_array(g, par.epsilon, P)
    gi = mat_inv_unitary(K[i], P)
    assert np.array_equal(mat_mul(gi, K[i], par.epsilon, P) % P, groups.identity_array(1)[0])


@settings(max_examples=40)
@given(st.lists(st.integers(0, 8), min_size=8, max_size=8))
def test_encode_decode_round_trip(vals):
    A = np.array(vals, dtype=np.int64).reshape(2, 2, 2)
    assert np.array_equal(decode(encode(A, 9), 9), A)


def test_canonical_lift_is_unitary(P3):
    K1 = quotient_enumerate(K_spec(), 1, P3)
    L = canonical_lift(K1, 1, P3)
    assert is_unitary_array(L, P3.epsilon, 9).all()
    assert np.array_equal(L % 3, K1)


def test_moy_prasad_patterns():
    assert moy_prasad_spec(0, 0).bounds == K_spec().bounds
    assert moy_prasad_spec(Fraction(1, 2), Fraction(1, 4)).bounds == (1, 0, 1, 1)
    assert moy_prasad_spec(0, 1, plus=True).bounds == principal_congruence(2).bounds
    with pytest.raises(ValueError):
        moy_prasad_spec(2, 0)


def test_monomial_conjugation_rules():
    # w alpha^k w^-1 = alpha^-k, read off the shifts
    for k in (1, 2):
        a = Monomial.alpha(k)
        wa = Monomial(a.e2, a.e1)
        assert np.array_equal(wa.shifts(), Monomial.alpha(-k).shifts())
    m = Monomial.alpha_w(1)
    assert m.inverse().inverse() == m
    assert K_spec().conjugate(Monomial.eta(1)).bounds == BK_spec(1).bounds


def test_conj_by_monomial_errors(P3):
    g = GroupElement.from_array(W, P3, 3)
    with pytest.raises(NotInSubgroup):
        conj_by_monomial(g, Monomial.eta(1).inverse())
    h = conj_by_monomial(GroupElement.identity(P3), Monomial.alpha(1))
    assert h.array.tolist() == GroupElement.identity(P3, h.level).array.tolist()


def test_factor_B_Kd_exhaustive_level2():
    par = make_params(3, 2)
    K = quotient_enumerate(K_spec(), 2, par)
    BK = K[BK_spec(1).contains(K, 2, par)]
    assert len(BK) == len(K) // 4  # index q + 1
    for A in BK:
        a = GroupElement.from_array(A, par, 2)
        b, k = factor_B_Kd(a, 1)
        assert b.array[1, 0].tolist() == [0, 0]
        assert principal_congruence(1).contains(k.array, 2, par)
        assert (b * k).entries == a.entries
    outside = K[~BK_spec(1).contains(K, 2, par)][0]
    with pytest.raises(NotInSubgroup):
        factor_B_Kd(GroupElement.from_array(outside, par, 2), 1)


def test_decompose_Bop_T_examples(P3, tori3):
    w = GroupElement.from_array(W, P3, 3)
    assert not decompose_Bop_T(w, tori3["T11"].c).uses_w
    assert decompose_Bop_T(w, tori3["T1w"].c).uses_w
    d = decompose_Bop_T(GroupElement.identity(P3), tori3["T11"].c)
    assert not d.uses_w
    assert d.lower.entries == GroupElement.identity(P3).entries
    assert d.torus.entries == GroupElement.identity(P3).entries


def test_double_coset_verify_trivial_and_ramified(P3):
    one = [GroupElement.identity(P3)]
    rep = double_coset_verify(K_spec(), K_spec(), one, P3, 2)
    assert rep["ok"] and rep["mass"] == quotient_order(P3, 2)
    # alpha^-1 conjugate of K, against G_{1/2,1/4} times the ramified torus
    tor = groups.standard_tori(3, P3.epsilon)["T1w"]
    H1 = K_spec().conjugate(Monomial.alpha(-1)).intersect(K_spec())
    H2 = Product(tor.model(), moy_prasad_spec(Fraction(1, 2), Fraction(1, 4)))
    w = GroupElement.from_array(W, P3, 3)
    rep = double_coset_verify(H1, H2, one + [w], P3, 2)
    assert rep["ok"] and rep["disjoint"] and len(rep["orbit_sizes"]) == 2
    single = double_coset_verify(H1, H2, one, P3, 2)
    assert not single["covered"]


def test_mp_isomorphism_is_additive():
    par = make_params(3, 2)
    K1 = quotient_enumerate(principal_congruence(1), 2, par)
    K2 = principal_congruence(2)
    rng = np.random.default_rng(1)
    for i, j in rng.integers(0, len(K1), (40, 2)):
        g, h = (GroupElement.from_array(K1[k], par, 2) for k in (i, j))
        Xg, Xh, Xgh = (mp_isomorphism(x, 0, 1, 2) for x in (g, h, g * h))
        assert np.array_equal(Xgh.reduce_mod(K2), (Xg.array + Xh.array) % 9)
        assert Xg.is_in_lie()
    assert not mp_isomorphism(GroupElement.identity(par), 0, 1, 2).array.any()
    with pytest.raises(NotInSubgroup):
        mp_isomorphism(GroupElement.from_array(W, par, 2), 0, 1, 2)


def test_fiber_sizes(P3):
    assert groups.kernel_fiber_size(P3, 1) == 81
    assert groups.kernel_fiber_size(P3, 2) == 81


def test_torus_and_center_membership(P3, tori3):
    Z = quotient_enumerate(center_spec(), 2, P3)
    assert len(Z) == 12
    for lab, t in tori3.items():
        T = quotient_enumerate(t.model(), 2, P3)
        assert Torus(t.c).contains(Z, 2, P3).all(), lab
        assert is_unitary_array(T, P3.epsilon, 9).all()


def test_transversal_covers(P3):
    reps = transversal(BK_spec(1), P3)
    assert len(reps) == 4  # |K : BK_1| = q + 1


def test_cap_is_enforced(P3):
    with pytest.raises(CapExceeded):
        quotient_enumerate(K_spec(), 3, P3, cap=1000)


def test_cache_round_trip(tmp_path, P3):
    groups.set_cache_dir(str(tmp_path))
    try:
        groups.clear_memo()
        cold = quotient_enumerate(BK_spec(1), 2, P3)
        groups.clear_memo()
        warm = quotient_enumerate(BK_spec(1), 2, P3)
        assert list(tmp_path.iterdir())
        assert np.array_equal(cold, warm)
    finally:
        groups.set_cache_dir(None)
        groups.clear_memo()


def test_inf_bounds_force_zero(P3):
    K = quotient_enumerate(K_spec(), 1, P3)
    inB = K[groups.B_spec().contains(K, 1, P3)]
    assert not inB[:, 1, 0].any()
    assert len(K[Bop_spec().contains(K, 1, P3)]) == len(inB)
    assert INF > 10 ** 5
