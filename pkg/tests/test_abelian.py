from fractions import Fraction

import numpy as np
import pytest

from branchlab.abelian import FiniteAbelianGroup
from branchlab.cuspidal import center_group
from branchlab.groups import K_spec, mat_mul, quotient_enumerate, standard_tori
from branchlab.scalars import make_params
from branchlab.supercuspidal import torus_quotient


def _groups():
    par = make_params(3, 3)
    tori = standard_tori(3, par.epsilon)
    yield "Z2", center_group(par, 2)
    yield "T11/1", torus_quotient(tori["T11"], Fraction(1), par)
    yield "T1w/half", torus_quotient(tori["T1w"], Fraction(1, 2), par)


@pytest.mark.parametrize("name,G", list(_groups()), ids=lambda x: x if isinstance(x, str) else "")
def test_characters_form_the_dual_group(name, G):
    assert int(np.prod(G.invariants)) == G.order
    chars = list(G.characters())
    assert len({c.exps for c in chars}) == G.order
    E = G.exponent
    P = G.params.p ** G.level
    reps = G.reps
    rng = np.random.default_rng(0)
    i, j = rng.integers(0, G.order, (2, 30))
    prod = mat_mul(reps[i], reps[j], G.params.epsilon, P)
    for c in chars:
        # homomorphism
        assert np.array_equal((c(reps[i]) + c(reps[j])) % E, c(prod))
        # orthogonality against the trivial character
        s = np.bincount(c(reps), minlength=E)
        assert (c.order == 1) == (s[0] == G.order)
        if c.order > 1:
            # uniform over the k-th roots, k the order
            step = E // c.order
            assert len(set(s[::step].tolist())) == 1 and s.sum() == s[::step].sum()
        assert E % c.order == 0


def test_center_is_cyclic():
    par = make_params(3, 3)
    for L in (1, 2, 3):
        Z = center_group(par, L)
        assert Z.order == 4 * 3 ** (L - 1)
        assert Z.exponent == Z.order
        assert any(c.order == Z.order for c in Z.characters())


def test_errors():
    par = make_params(3, 2)
    Z = center_group(par, 1)
    with pytest.raises(IndexError):
        Z.character(Z.order)
    K1 = quotient_enumerate(K_spec(), 1, par)
    with pytest.raises(ValueError):
        Z.labels_of(K1[:20])
    with pytest.raises(ValueError):
        FiniteAbelianGroup(Z.elements, K1[:5], par, 1)
    assert Z.character(0).is_trivial_on(Z.elements)
