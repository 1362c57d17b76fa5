import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from negmoment import permgroup as pg
from negmoment import reference as ref
from negmoment.permgroup import Permutation

from oracles import orbit_embeds, perm_matrix

perms = st.integers(1, 6).flatmap(lambda t: st.permutations(list(range(t)))).map(
    lambda m: Permutation(tuple(m)))


def same_size_pair():
    return st.integers(1, 6).flatmap(lambda t: st.tuples(
        st.permutations(list(range(t))), st.permutations(list(range(t))))).map(
        lambda pq: (Permutation(tuple(pq[0])), Permutation(tuple(pq[1]))))


# ------------------------------------------------------------- group basics

@pytest.mark.parametrize("t,n", [(1, 1), (3, 6), (6, 720)])
def test_group_sizes(t, n):
    g = pg.enumerate_group(t)
    assert len(g) == n == len(set(g))
    assert g[0].is_identity()


@pytest.mark.parametrize("t", [0, 7, -1])
def test_group_size_out_of_range(t):
    with pytest.raises(ValueError):
        pg.enumerate_group(t)


def test_group_order_is_lexicographic():
    maps = [p.mapping for p in pg.enumerate_group(4)]
    assert maps == sorted(maps)


def test_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


@given(perms)
def test_inverse_composes_to_identity(p):
    assert pg.compose(p, pg.inverse(p)).is_identity()
    assert pg.compose(pg.inverse(p), p).is_identity()


@given(same_size_pair())
def test_operator_product_reverses_composition(pq):
    p, q = pq
    if p.size > 3:
        return
    d = 2
    lhs = perm_matrix(p.mapping, d) @ perm_matrix(q.mapping, d)
    rhs = perm_matrix(pg.compose(q, p).mapping, d)
    assert np.array_equal(lhs, rhs)


@pytest.mark.parametrize("t", [3, 4])
def test_product_table_matches_compose(t):
    g = pg.enumerate_group(t)
    tab = pg.product_table(t)
    for i, j in itertools.product(range(len(g)), repeat=2):
        assert g[tab[i, j]] == pg.compose(g[i], g[j])


def test_parse_and_print_round_trip():
    p = Permutation.parse("(1,4,6)(3,5)", 6)
    assert str(p) == "(1,4,6)(3,5)"
    assert Permutation.parse("()", 3).is_identity()


def test_cyclic_shift_on_strings():
    w0 = Permutation.from_cycles(3, (1, 2, 3))
    assert pg.permute_string(w0, ("a1", "a2", "a3")) == ("a2", "a3", "a1")


# -------------------------------------------------------------- cycle types

@pytest.mark.parametrize("text,t,lam", [
    ("(1,4,6)(3,5)", 6, (3, 2, 1)),
    ("()", 3, (1, 1, 1)),
    ("(1,2,3)", 3, (3,)),
])
def test_cycle_type_examples(text, t, lam):
    assert pg.cycle_type(Permutation.parse(text, t)) == lam


@given(perms)
def test_cycle_type_is_a_partition(p):
    lam = pg.cycle_type(p)
    assert sum(lam) == p.size
    assert list(lam) == sorted(lam, reverse=True)
    assert pg.validate_partition(lam) == lam


@pytest.mark.parametrize("t,count", [(1, 1), (3, 3), (4, 5), (5, 7), (6, 11)])
def test_partition_counts(t, count):
    assert len(pg.partitions(t)) == count


def test_invalid_partition():
    for bad in [(1, 2), (0,), ()]:
        with pytest.raises(ValueError):
            pg.validate_partition(bad)


@pytest.mark.parametrize("t", [3, 4, 5, 6])
def test_class_sizes_sum_to_group_order(t):
    sizes = np.bincount(pg.class_of(t))
    assert sizes.sum() == math.factorial(t)
    for lam, n in zip(pg.partitions(t), sizes):
        z = math.prod(k ** m * math.factorial(m)
                      for k, m in ((k, lam.count(k)) for k in set(lam)))
        assert n == math.factorial(t) // z


# ---------------------------------------------------------- string classes

def test_string_class_worked_example():
    omega, lam = pg.string_class((5, 3, 5, 5, 3, 0))
    assert str(omega) == "(1,3,4)(2,5)"
    assert lam == (3, 2, 1)


def test_string_class_trivial_cases():
    assert pg.string_class((4, 4, 4))[1] == (3,)
    omega, lam = pg.string_class((0, 1, 2))
    assert omega.is_identity() and lam == (1, 1, 1)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=6))
def test_string_class_cycles_are_increasing(s):
    omega, lam = pg.string_class(s)
    for cyc in omega.cycles():
        assert list(cyc) == sorted(cyc)
        assert len({s[i] for i in cyc}) == 1
    assert sorted(lam) == sorted(s.count(x) for x in set(s))


# --------------------------------------------------------------- embedding

def test_embeds_examples():
    assert pg.embeds(Permutation.parse("(1,2)(4,6)", 6), Permutation.parse("(1,2,3)(4,6)", 6))
    assert not pg.embeds(Permutation.parse("(1,2)", 6), Permutation.parse("(1,3)", 6))
    for w in pg.enumerate_group(4):
        assert pg.embeds(Permutation.identity(4), w)


def test_embeds_size_mismatch():
    with pytest.raises(ValueError):
        pg.embeds(Permutation.identity(3), Permutation.identity(4))


@given(same_size_pair())
def test_embeds_matches_orbit_oracle(pq):
    p, q = pq
    assert pg.embeds(p, q) == orbit_embeds(p.mapping, q.mapping)


@pytest.mark.parametrize("t", [3, 4])
def test_embeds_reflexive_and_transitive(t):
    g = pg.enumerate_group(t)
    for p in g:
        assert pg.embeds(p, p)
    for a, b, c in itertools.product(g, repeat=3):
        if pg.embeds(a, b) and pg.embeds(b, c):
            assert pg.embeds(a, c)


@pytest.mark.parametrize("cyc,s,want", [
    ((1, 2, 3), (2, 2, 2), 1),
    ((1, 2), (0, 1, 1), 0),
    ((2, 3), (0, 1, 1), 1),
])
def test_matrix_element_examples(cyc, s, want):
    p = Permutation.from_cycles(3, cyc)
    assert pg.matrix_element(p, s) == want
    # brute-force <s|W|s> on the 3-copy matrix, d = 3
    idx = int(np.ravel_multi_index(s, (3, 3, 3)))
    assert perm_matrix(p.mapping, 3)[idx, idx] == want


@pytest.mark.parametrize("t,d", [(3, 3), (4, 2)])
def test_matrix_element_is_dense_diagonal(t, d):
    for p in pg.enumerate_group(t):
        diag = np.diag(perm_matrix(p.mapping, d))
        got = [pg.matrix_element(p, s) for s in itertools.product(range(d), repeat=t)]
        assert np.array_equal(diag, got)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=6))
@settings(max_examples=60)
def test_diagonal_sum_is_symmetry_factor(s):
    t = len(s)
    total = sum(pg.matrix_element(p, s) for p in pg.enumerate_group(t))
    assert total == pg.symmetry_factor(pg.string_class(s)[1])


@pytest.mark.parametrize("lam,want", [((3, 2, 1), 12), ((1, 1, 1), 1), ((6,), 720)])
def test_symmetry_factor_examples(lam, want):
    assert pg.symmetry_factor(lam) == want


def test_symmetry_factor_counts_embeddable_permutations():
    for t in (3, 4, 5):
        for lam in pg.partitions(t):
            sigma = pg.class_representative(lam)
            n = sum(pg.embeds(p, sigma) for p in pg.enumerate_group(t))
            assert n == pg.symmetry_factor(lam)


# ------------------------------------------------------- embedding constants

@pytest.mark.parametrize("xi,lam,want", [((2, 1), (3,), 3), ((2, 2), (4,), 3)])
def test_embedding_constant_examples(xi, lam, want):
    assert pg.embedding_constant(xi, lam) == want


@pytest.mark.parametrize("t", [3, 4, 5, 6])
def test_identity_row_is_all_ones(t):
    assert all(pg.embedding_constant((1,) * t, lam) == 1 for lam in pg.partitions(t))


def test_embedding_constant_size_mismatch():
    with pytest.raises(ValueError):
        pg.embedding_constant((2, 1), (2, 2))


@pytest.mark.parametrize("t", [4, 5])
def test_embedding_constant_independent_of_representative(t):
    rng = np.random.default_rng(t)
    g = pg.enumerate_group(t)
    for lam in pg.partitions(t):
        members = [p for p in g if pg.cycle_type(p) == lam]
        for k in rng.choice(len(members), size=min(3, len(members)), replace=False):
            for xi in pg.partitions(t):
                assert pg.embedding_constant(xi, lam, members[k]) == pg.embedding_constant(xi, lam)


@pytest.mark.parametrize("t", [3, 4, 5, 6])
def test_gamma_tables_match_reference(t):
    # the regenerated table is computed by brute force over S_t
    assert np.array_equal(pg.gamma_table(t), np.array(ref.GAMMA_TABLES[t]))


@pytest.mark.parametrize("t", [3, 4, 5])
def test_gamma_column_sums_are_symmetry_factors(t):
    tab = pg.gamma_table(t)
    for j, lam in enumerate(pg.partitions(t)):
        assert tab[:, j].sum() == pg.symmetry_factor(lam)


def test_gamma_csv_dump():
    text = pg.gamma_table_csv(3).splitlines()
    assert text[0] == "xi\\lambda,[111],[21],[3]"
    assert text[2] == "[21],0,1,3"


# ---------------------------------------------------------- set partitions

@pytest.mark.parametrize("t,bell", [(1, 1), (3, 5), (4, 15), (6, 203)])
def test_set_partition_counts(t, bell):
    assert len(pg.set_partitions(t)) == bell


def test_falling_factorial():
    assert pg.falling_factorial(5, 3) == 60
    assert pg.falling_factorial(2, 3) == 0


def test_weight():
    assert [pg.weight(s) for s in [(1, 1, 1), (0, 2, 0), (0, 1, 2)]] == [3, 2, 1]
