from fractions import Fraction

import pytest

from branchlab.groups import Monomial, standard_tori
from branchlab.identities import bk_identities, bop_t_decomposition, intersection_factorisation, z_isotypic
from branchlab.scalars import make_params


@pytest.fixture(scope="module")
def setup():
    par = make_params(3, 3)
    return par, standard_tori(3, par.epsilon)


@pytest.mark.parametrize("d", [1, 2])
def test_bk_identities(setup, d):
    par, _ = setup
    out = bk_identities(d, par, d + 1)
    assert out["K & K^eta^d = BK_d"] and out["(BK_d)^eta^-d = BopK_d"]
    # BK_d has index (q + 1) q^(d-1) in K
    assert out["|BK_d|"] * 4 * 3 ** (d - 1) == 7776 * 81 ** (d - 1)


@pytest.mark.parametrize("lab", ["T11", "Tww", "T1w", "T1ew"])
def test_bop_t_decomposition(setup, lab):
    par, tori = setup
    out = bop_t_decomposition(tori[lab].c, par, 2)
    assert out["all factor"]
    assert (out["w coset"] > 0) == tori[lab].ramified


def test_intersection_factorisation(setup):
    par, tori = setup
    out = intersection_factorisation(tori["T1w"], Fraction(1, 4), Monomial.alpha(1), par, 3)
    assert out["direct = product of intersections"] and out["direct = symbolic"]
    assert out["size"] == 8748  # frozen from the direct count
    with pytest.raises(ValueError):
        intersection_factorisation(tori["T1w"], Fraction(1, 4), Monomial.alpha(1), par, 2)


def test_z_isotypic(setup):
    par, tori = setup
    out = z_isotypic(tori["T11"], Monomial.alpha(1), par, 3)
    assert out["K & T^g = Z (K & T_0+^g)"] and out["direct = symbolic"]
    assert out["size"] == 972  # frozen from the direct count
