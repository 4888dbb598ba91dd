from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from branchlab.classfn import (
    CyclotomicValue,
    Terms,
    cyclotomic_poly,
    depth_of,
    double_coset_reps,
    equal_pointwise,
    euler_phi,
    fixed_dim,
    frobenius_pairing,
    induce,
    inner_product,
    mackey_pairing,
    product_character,
    trivial_character,
)
from branchlab.groups import BK_spec, K_spec, principal_congruence, quotient_enumerate
from branchlab.scalars import make_params


def test_cyclotomic_polynomials():
    assert cyclotomic_poly(1) == (-1, 1)
    assert cyclotomic_poly(3) == (1, 1, 1)
    assert cyclotomic_poly(4) == (1, 0, 1)
    assert cyclotomic_poly(6) == (1, -1, 1)
    assert cyclotomic_poly(9) == (1, 0, 0, 1, 0, 0, 1)
    for m in (5, 8, 12, 24, 27):
        assert len(cyclotomic_poly(m)) - 1 == euler_phi(m)


@pytest.mark.parametrize("m", [2, 3, 4, 6, 8, 9, 12])
def test_roots_of_unity(m):
    z = CyclotomicValue.root(1, m)
    total = CyclotomicValue.integer(0)
    power = CyclotomicValue.integer(1)
    for _ in range(m):
        total = total + power
        power = power * z
    assert power == 1
    assert total == 0
    assert z * z.conj() == 1


ORDERS = st.sampled_from([3, 4, 6, 8, 9])


@st.composite
def values(draw, m):
    return CyclotomicValue.from_counts(draw(st.lists(st.integers(-4, 4), min_size=m, max_size=m)), m)


@st.composite
def value_triples(draw):
    m = draw(ORDERS)
    return draw(values(m)), draw(values(m)), draw(values(m))


@given(value_triples())
def test_cyclotomic_ring_laws(xyz):
    x, y, z = xyz
    assert x * (y + z) == x * y + x * z
    assert x * y == y * x
    assert (x * y).conj() == x.conj() * y.conj()
    assert x - x == 0
    assert hash(x + 0) == hash(x)


def test_rational_extraction():
    assert CyclotomicValue.from_counts([5, 0, 0], 3).to_int() == 5
    # 1 + z + z^2 = 0
    assert CyclotomicValue.from_counts([2, 1, 1], 3).to_int() == 1
    with pytest.raises(ValueError):
        CyclotomicValue.root(1, 3).to_int()


def test_terms_dense_and_values():
    t = Terms(3, np.array([0, 0, 2]), np.array([0, 1, 2]), np.array([1, 2, 1]), 3)
    D = t.dense()
    assert D.tolist() == [[1, 2, 0], [0, 0, 0], [0, 0, 1]]
    assert t.value(1) == 0
    assert t.value(2) == CyclotomicValue.root(2, 3)
    assert t.at_order(6).value(0) == t.value(0)
    with pytest.raises(ValueError):
        t.at_order(4)


def test_trivial_character_basics(P3):
    one = trivial_character(K_spec(), P3)
    assert one.degree == 1
    assert inner_product(one, one, 1) == 1
    assert depth_of(one, 3) == 0
    assert fixed_dim(one, principal_congruence(1), 2) == 1


def test_induction_from_BK1_three_routes():
    # K acts doubly transitively on the q + 1 cosets of BK_1
    par = make_params(3, 2)
    one_B = trivial_character(BK_spec(1), par)
    ind = induce(one_B, K_spec())
    assert ind.degree == 4
    direct = inner_product(ind, ind, 1)
    frob = frobenius_pairing(one_B, ind, 1)
    reps = double_coset_reps(BK_spec(1), BK_spec(1), K_spec(), par, 1)
    mackey = mackey_pairing(one_B, one_B, reps, 1)
    assert direct == frob == mackey == 2
    assert len(reps) == 2
    assert fixed_dim(ind, K_spec(), 1) == 1


def test_equal_pointwise_and_products(P3):
    one = trivial_character(K_spec(), P3)
    A = quotient_enumerate(K_spec(), 1, P3)
    assert equal_pointwise(one, product_character(one, one), A, 1)
    ind = induce(trivial_character(BK_spec(1), P3), K_spec())
    assert not equal_pointwise(one, ind, A, 1)
    with pytest.raises(ValueError):
        product_character(one, ind)(A, 1)
    assert Fraction(inner_product(ind, one, 1)) == 1
