from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branchlab.scalars import (
    FieldParams,
    LaurentScalar,
    TruncatedScalar,
    conj,
    e_conj,
    e_inv,
    e_mul,
    e_norm,
    enumerate_norm_one,
    frac_to_residue,
    hensel_sqrt,
    least_nonresidue,
    make_params,
    norm,
    norm_one_array,
    solve_norm,
    solve_norm_array,
    trace,
    valuation,
    vp,
    vp_frac,
)

PRIMES = st.sampled_from([3, 5, 7])


@st.composite
def scalars(draw, p=None, N=3):
    p = p or draw(PRIMES)
    par = make_params(p, N)
    P = p ** N
    return TruncatedScalar(draw(st.integers(0, P - 1)), draw(st.integers(0, P - 1)), par)


@st.composite
def triples(draw):
    p = draw(PRIMES)
    return draw(scalars(p)), draw(scalars(p)), draw(scalars(p))


@given(triples())
def test_ring_axioms(xyz):
    x, y, z = xyz
    assert x * (y + z) == x * y + x * z
    assert (x * y) * z == x * (y * z)
    assert x * y == y * x
    assert x - x == 0


@given(triples())
def test_conjugation_is_a_ring_map_and_norm_multiplies(xyz):
    x, y, _ = xyz
    assert conj(x * y) == conj(x) * conj(y)
    assert conj(conj(x)) == x
    assert norm(x * y) == norm(x) * norm(y) % x.mod
    assert trace(x) == (x + conj(x)).a0 and (x + conj(x)).a1 == 0


@given(scalars())
def test_inverse_of_units(x):
    if x.is_unit():
        assert x * x.inverse() == 1
    else:
        with pytest.raises(ZeroDivisionError):
            x.inverse()


def test_field_params_validation():
    with pytest.raises(ValueError):
        make_params(4, 2)
    with pytest.raises(ValueError):
        FieldParams(3, 2, 1)  # 1 is a square
    with pytest.raises(ValueError):
        make_params(3, 0)
    assert least_nonresidue(3) == 2 and least_nonresidue(7) == 3


def test_valuations():
    assert vp(18, 3) == 2 and vp_frac(Fraction(5, 27), 3) == -3
    with pytest.raises(ValueError):
        vp(0, 3)
    par = make_params(3, 4)
    assert valuation(TruncatedScalar(9, 27, par)).value == 2
    v0 = valuation(TruncatedScalar(0, 0, par))
    assert not v0.exact and v0.value == 4
    assert frac_to_residue(Fraction(1, 2), 3, 2) * 2 % 9 == 1
    with pytest.raises(ValueError):
        frac_to_residue(Fraction(1, 3), 3, 2)


@settings(max_examples=60)
@given(scalars())
def test_hensel_sqrt_squares_back(u):
    if not u.is_unit():
        return
    r = hensel_sqrt(u)
    # a unit is a square iff its norm is a square mod p
    p = u.params.p
    is_sq = pow(norm(u) % p, (p - 1) // 2, p) == 1
    assert (r is not None) == is_sq
    if r is not None:
        assert r * r == u


@settings(max_examples=60)
@given(PRIMES, st.integers(1, 10 ** 6))
def test_solve_norm_hits_every_unit(p, t):
    par = make_params(p, 3)
    t %= par.modulus
    if t % p == 0:
        return
    a = solve_norm(t, par)
    assert norm(a) == t
    one_mod_p = (1 + p * t) % par.modulus
    b = solve_norm(one_mod_p, par, level=1)
    assert norm(b) == one_mod_p and (b.a0 - 1) % p == 0 and b.a1 % p == 0


def test_solve_norm_errors():
    par = make_params(3, 2)
    with pytest.raises(ValueError):
        solve_norm(3, par)
    with pytest.raises(ValueError):
        solve_norm(TruncatedScalar(1, 1, par))
    with pytest.raises(ValueError):
        solve_norm(2, par, level=1)
    with pytest.raises(ValueError):
        solve_norm(5)


@pytest.mark.parametrize("p", [3, 5])
def test_norm_one_reps_have_norm_one(p):
    par = make_params(p, 3)
    reps = enumerate_norm_one(par, 2)
    assert len(reps) == (p + 1) * p
    assert all(norm(x) == 1 for x in reps)
    assert len({(x.a0 % p ** 2, x.a1 % p ** 2) for x in reps}) == len(reps)


def test_norm_one_array_rejects_level_zero():
    with pytest.raises(ValueError):
        norm_one_array(make_params(3, 2), 0)


@st.composite
def pair_arrays(draw):
    p = draw(PRIMES)
    P = p ** 3
    n = draw(st.integers(1, 20))
    xs = draw(st.lists(st.tuples(st.integers(0, P - 1), st.integers(0, P - 1)), min_size=n, max_size=n))
    ys = draw(st.lists(st.tuples(st.integers(0, P - 1), st.integers(0, P - 1)), min_size=n, max_size=n))
    return p, np.array(xs, dtype=np.int64), np.array(ys, dtype=np.int64)


@given(pair_arrays())
def test_array_kernels_match_scalar_class(data):
    p, X, Y = data
    par = make_params(p, 3)
    P = par.modulus
    M, C, Nm = e_mul(X, Y, par.epsilon, P), e_conj(X, P), e_norm(X, par.epsilon, P)
    for i in range(len(X)):
        x = TruncatedScalar(int(X[i, 0]), int(X[i, 1]), par)
        y = TruncatedScalar(int(Y[i, 0]), int(Y[i, 1]), par)
        assert (x * y).a0 == M[i, 0] and (x * y).a1 == M[i, 1]
        assert (conj(x).a0, conj(x).a1) == tuple(C[i])
        assert norm(x) == Nm[i]
        if x.is_unit():
            inv = e_inv(X[i:i + 1], par.epsilon, P)[0]
            assert (x.inverse().a0, x.inverse().a1) == tuple(inv)


def test_solve_norm_array_matches():
    par = make_params(5, 3)
    P = par.modulus
    t = np.array([t for t in range(1, P) if t % 5 and t % 5 == 1])
    a = solve_norm_array(t, par, 3)
    assert np.array_equal(e_norm(a, par.epsilon, P), t)


def test_laurent_scalars():
    par = make_params(3, 4)
    x = LaurentScalar.from_fraction(Fraction(1, 9), par)
    y = LaurentScalar.from_fraction(Fraction(2, 3), par, sqrt_part=True)
    assert x.valuation().value == -2 and y.valuation().value == -1
    assert (x * 9).as_truncated() == 1
    s = x + y
    assert s.shift == 2 and s.abs_prec == 2
    with pytest.raises(ValueError):
        x.as_truncated()
