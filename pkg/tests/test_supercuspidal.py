from fractions import Fraction

import numpy as np
import pytest

from branchlab.classfn import CyclotomicValue, fixed_dim, inner_product
from branchlab.cuspidal import CentralCharacter
from branchlab.groups import quotient_enumerate, standard_tori
from branchlab.scalars import LaurentScalar, make_params
from branchlab.suites import generic_v, pick_datum
from branchlab.supercuspidal import (
    DepthDElement,
    LieDatum,
    PrecisionError,
    Psi_X,
    build_rho,
    check_multiplicative,
    check_parity,
    generic_valuation,
    make_generic,
    nilpotent_S_d,
    polarization_character,
    psi_additive,
    reduce_central,
    torus_multiplicities,
)
from branchlab.verifier import degree_formula


@pytest.fixture(scope="module")
def par():
    return make_params(3, 4)


@pytest.fixture(scope="module")
def tori(par):
    return standard_tori(3, par.epsilon)


def test_depth_d_element_validation():
    DepthDElement(Fraction(1, 3), Fraction(1, 9), Fraction(1, 3), 2, 3)
    with pytest.raises(ValueError):
        DepthDElement(0, Fraction(1, 3), 0, 2, 3)  # nu(u) = -1
    with pytest.raises(ValueError):
        DepthDElement(0, Fraction(1, 9), Fraction(1, 9), 2, 3)
    with pytest.raises(ValueError):
        DepthDElement(Fraction(1, 27), Fraction(1, 9), 0, 2, 3)
    with pytest.raises(ValueError):
        DepthDElement.nilpotent(3, 1, 3)
    with pytest.raises(ValueError):
        DepthDElement(0, 1, 0, 0, 3)


def test_psi_additive_values():
    par = make_params(3, 3)
    assert psi_additive(LaurentScalar.from_fraction(Fraction(0), par)) == 1
    # trivial on p, primitive of order p on the units
    assert psi_additive(LaurentScalar.from_fraction(Fraction(3), par)) == 1
    assert psi_additive(LaurentScalar.from_fraction(Fraction(1), par)) == CyclotomicValue.root(1, 3)
    assert psi_additive(LaurentScalar.from_fraction(Fraction(1, 3), par)) == CyclotomicValue.root(1, 9)


@pytest.mark.parametrize("d", [1, 2])
def test_psi_X_is_a_character_of_J_d(par, d):
    X = DepthDElement(Fraction(1, 3), Fraction(2, 3 ** d), Fraction(1, 3 ** (d - 1)), d, 3)
    f = Psi_X(X, d, par)
    rng = np.random.default_rng(d)
    n = len(quotient_enumerate(f.domain, f.level, par))
    check_multiplicative(f, f.level, rng.integers(0, n, (2000, 2)))
    with pytest.raises(ValueError):
        f(quotient_enumerate(f.domain, 1, par)[:2], 1)
    with pytest.raises(PrecisionError):
        X.psi_exponents(quotient_enumerate(f.domain, 1, par)[:2], 1, par)


def test_psi_X_fails_off_its_domain(par):
    # with nu(u) = -2 the character does not live on the bigger group J_1
    f = Psi_X(LieDatum(0, Fraction(1, 9), 0), 1, par)
    with pytest.raises(ValueError):
        check_multiplicative(f, 3, np.random.default_rng(0).integers(0, 500, (4000, 2)))


@pytest.mark.parametrize("d", [1, 2])
def test_nilpotent_S_d_is_irreducible(d):
    par = make_params(3, d + 2)
    S = nilpotent_S_d(CentralCharacter(0, 1, 3), d, par)
    assert S.degree == degree_formula(3, d)
    if d == 1:
        assert inner_product(S, S, d + 1) == 1


def test_parity_and_genericity(tori):
    with pytest.raises(ValueError):
        check_parity(tori["T11"], Fraction(1, 2))
    with pytest.raises(ValueError):
        check_parity(tori["T1w"], Fraction(1))
    with pytest.raises(ValueError):
        check_parity(tori["T11"], Fraction(0))
    for lab, r in (("T11", 1), ("T1w", Fraction(1, 2)), ("Tww", 1)):
        t = tori[lab]
        assert generic_valuation(t, generic_v(t, Fraction(r), 3), 3) == -r


def test_non_generic_data_rejected(par, tori):
    with pytest.raises(ValueError):
        make_generic(tori["T11"], 1, Fraction(1, 9), par)


@pytest.mark.parametrize("lab,r", [("T11", Fraction(1)), ("T1w", Fraction(1, 2))])
def test_one_dimensional_rho(par, tori, lab, r):
    rho = build_rho(pick_datum(tori[lab], r, par))
    assert rho.kind == "one-dimensional" and rho.degree == 1
    assert all(rho.checks.values())
    with pytest.raises(ValueError):
        polarization_character(rho)


def test_heisenberg_rho(par, tori):
    rho = build_rho(pick_datum(tori["T11"], Fraction(2), par))
    assert rho.kind == "heisenberg" and rho.degree == 3
    assert all(rho.checks.values())
    mult = torus_multiplicities(rho)
    assert all(m in (0, 1) for m in mult) and sum(mult) == 3
    for choice in (0, 1):
        ext = polarization_character(rho, choice)
        assert ext.degree == 1
        K1 = rho.polarization
        assert fixed_dim(ext, K1, ext.level) in (0, 1)


def test_central_reduction(par, tori):
    D = pick_datum(tori["T11"], Fraction(1), par)
    rep = reduce_central(D)
    if rep["decomposable"]:
        assert rep["gamma~ found"]
        assert rep["chi_rho = lambda chi_rho~"]
        assert rep["central character in {1, delta}"]
    else:
        assert "not delta^k" in rep["reason"]
