from collections import Counter

import pytest
from hypothesis import given, strategies as st

from branchlab.cuspidal import (
    CentralCharacter,
    ResidueCharacter,
    all_cuspidal,
    brute_force_irreducibles,
    class_tags,
    decompose_central,
    eta_twist,
    quadratic_central,
    residue_group,
    residue_inner_product,
    table2_character,
    table_character_mod_l,
    unipotent_sums,
)
from branchlab.scalars import make_params


@pytest.fixture(scope="module", params=[3, 5])
def par(request):
    return make_params(request.param, 2)


def test_table_is_orthonormal(par):
    q = par.p
    sig = all_cuspidal(par)
    assert len(sig) == q * (q + 1) // 2
    for i, s in enumerate(sig):
        assert s.character.degree == q - 1
        for j in range(i, len(sig)):
            ip = residue_inner_product(s.character, sig[j].character, par)
            assert ip == (1 if i == j else 0)


def test_cuspidal_means_no_unipotent_fixed_vectors(par):
    for s in all_cuspidal(par):
        assert all(v == 0 for v in unipotent_sums(s, par))


def test_class_tag_counts(par):
    q = par.p
    tags = Counter(kind for kind, _ in class_tags(par))
    assert sum(tags.values()) == len(residue_group(par)) == q * (q + 1) * (q * q - 1)
    assert tags["central"] == q + 1
    assert tags["unipotent"] == (q + 1) * (q * q - 1)


def test_brute_force_contains_the_table():
    par = make_params(3, 2)
    bf = brute_force_irreducibles(par)
    assert sum(d * d for d in bf.degrees) == len(residue_group(par))
    found = set(bf.characters)
    for s in all_cuspidal(par):
        assert table_character_mod_l(s, bf, par) in found


def test_distinct_characters_required(par):
    with pytest.raises(ValueError):
        table2_character(ResidueCharacter(1, par.p), ResidueCharacter(1, par.p), par)
    with pytest.raises(ValueError):
        eta_twist(all_cuspidal(par)[0], 0)


def test_eta_twist_keeps_degree(par):
    s = all_cuspidal(par)[0]
    assert eta_twist(s, 1).degree == par.p - 1


@given(st.sampled_from([3, 5, 7]), st.integers(1, 3), st.integers(0, 10 ** 6))
def test_decompose_central(q, level, j):
    theta = CentralCharacter(j, level, q).normal()
    try:
        k, mu = decompose_central(theta)
    except ValueError:
        # only odd characters at q = 3 mod 4 fail
        assert q % 4 == 3 and theta.index % 2 == 1
        return
    assert quadratic_central(level, q) ** k * mu ** 2 == theta


@given(st.sampled_from([3, 5]), st.integers(0, 1000))
def test_at_level_is_a_homomorphism(q, j):
    a, b = CentralCharacter(j, 1, q).normal(), CentralCharacter(j + 1, 1, q).normal()
    assert (a * b).at_level(2) == a.at_level(2) * b.at_level(2)
    assert CentralCharacter(0, 1, q).at_level(3).is_trivial()
    with pytest.raises(ValueError):
        a.at_level(2).at_level(1)
