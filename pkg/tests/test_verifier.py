from fractions import Fraction

import pytest

from branchlab.cuspidal import CentralCharacter, all_cuspidal
from branchlab.scalars import make_params
from branchlab.verifier import (
    BranchingReport,
    ComponentRecord,
    NilpotentOrbitRep,
    degree_formula,
    depth_zero_components,
    dim_closed_form,
    n_table_rows,
    nilpotent_coefficients,
    observed_depth,
    table_row_for,
    verify_depth_zero_iso,
)

HALF = Fraction(1, 2)


def test_degree_formula():
    assert [degree_formula(3, d) for d in (1, 2, 3)] == [8, 24, 72]
    assert degree_formula(5, 2) == 120
    # the trivial-t component of an unramified rho
    assert degree_formula(3, 1, 0, Fraction(0), Fraction(1)) == 6
    assert degree_formula(3, 2, 1, Fraction(0), Fraction(1)) == 24


def test_nilpotent_coefficients():
    assert nilpotent_coefficients("T1w", True, HALF) == (1, 1)
    assert nilpotent_coefficients("T11", False, Fraction(2)) == (1, 0)
    assert nilpotent_coefficients("T11", False, Fraction(1)) == (0, 1)
    assert nilpotent_coefficients("Tww", False, Fraction(1)) == (1, 0)
    with pytest.raises(ValueError):
        nilpotent_coefficients("T1w", False, Fraction(1))


def test_closed_form_dimensions():
    assert dim_closed_form("T1w", True, HALF, 3) == 8
    assert dim_closed_form("T11", False, Fraction(1), 3) == 6
    assert dim_closed_form("Tww", False, Fraction(1), 3) == 24
    assert dim_closed_form("T11", False, Fraction(2), 3) == 9 * 26


def test_n_table_rows_and_ambiguity():
    rows = n_table_rows(Fraction(2), 3)
    assert rows["row 1: q - q^r"] == -6 and rows["row 2: 1 - q^r"] == -8
    assert rows["row 3: (q+1)(q^(r-1/2) - 1)"] is None
    assert n_table_rows(Fraction(3, 2), 3)["row 3: (q+1)(q^(r-1/2) - 1)"] == 8
    assert table_row_for("T11", False, Fraction(2)) == "row 1: q - q^r"
    assert table_row_for("Tww", False, Fraction(2)) == "row 2: 1 - q^r"
    assert table_row_for("T11", False, Fraction(1)) is None
    assert table_row_for("Tww", False, Fraction(3)) is None


def test_orbit_rep_depths():
    th = CentralCharacter(0, 1, 3)
    assert NilpotentOrbitRep("even", th, 5).depths == [2, 4]
    assert NilpotentOrbitRep("odd", th, 5).depths == [1, 3, 5]
    assert NilpotentOrbitRep("even", th, 3).fixed_dim_closed_form(Fraction(1), 3) == 24
    assert NilpotentOrbitRep("odd", th, 3).fixed_dim_closed_form(Fraction(1), 3) == 8
    with pytest.raises(ValueError):
        NilpotentOrbitRep("odd", th, 3).component(2, make_params(3, 3))


def test_report_bookkeeping():
    rep = BranchingReport({})
    rep.check("a", "x", 1, 1)
    assert rep.passed
    rep.check("b", "x", 1, 2, passed=True)
    assert rep.passed
    rep.check("c", "x", 1, 1, passed=False)
    assert not rep.passed
    rep.components += [ComponentRecord("u", 1, 8), ComponentRecord("v", 2, 8)]
    assert not rep.distinct_degrees()


def test_depth_zero_components_at_q3():
    par = make_params(3, 3)
    sig = all_cuspidal(par)[0]
    with pytest.raises(ValueError):
        depth_zero_components(sig, "B", 2)
    even = depth_zero_components(sig, "K", 2)
    odd = depth_zero_components(sig, "K^eta", 3)
    assert [d for d, _ in even] == [0, 2] and [d for d, _ in odd] == [1, 3]
    assert observed_depth(sig.character, 0) == 0
    assert observed_depth(sig.character, 1) is None
    rep = BranchingReport({})
    rec = verify_depth_zero_iso(sig, 1, par, rep)
    assert rep.passed, [c for c in rep.checks if not c.passed]
    assert rec.degree == 8 and rec.pairing == 1 and rec.pointwise
