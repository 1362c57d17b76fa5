import itertools
import math
from collections import Counter, defaultdict
from fractions import Fraction

import numpy as np
import pytest
from sympy.utilities.iterables import multiset_partitions

from negmoment import permgroup as pg
from negmoment import qstate
from negmoment import reference as ref
from negmoment import variance as var
from negmoment import weingarten as wg

from oracles import o_plus_weight_value, tensor_power

PAIRS = {3: ((0, 1, 2), (0, 1, 2)), 4: ((0, 1, 2), (0, 1, 3)),
         5: ((0, 1, 2), (0, 3, 4)), 6: ((0, 1, 2), (3, 4, 5))}


def _tally_oracle(t):
    out = defaultdict(Counter)
    for blocks in multiset_partitions(list(range(t))):
        label = {i: k for k, b in enumerate(blocks) for i in b}
        lam = tuple(sorted((len(b) for b in blocks), reverse=True))
        ws = []
        for trip in PAIRS[t]:
            ws.append(max(Counter(label[i] for i in trip).values()))
        out[lam][tuple(sorted(ws))] += 1
    return {k: dict(v) for k, v in out.items()}


# ----------------------------------------------------------------- tallies

@pytest.mark.parametrize("t", [3, 4, 5, 6])
def test_class_tallies_match_set_partition_oracle(t):
    assert var.class_tallies(t) == _tally_oracle(t)


@pytest.mark.parametrize("t", [3, 5, 6])
def test_class_tallies_match_reference(t):
    assert var.class_tallies(t) == ref.CLASS_TALLIES[t]


def test_q4_tally_reference_entry():
    got = var.class_tallies(4)
    printed = ref.CLASS_TALLIES[4]
    for lam in printed:
        if lam != (3, 1):
            assert got[lam] == printed[lam]
    # [31] has 4 set partitions; the printed weights sum to 3
    assert sum(got[(3, 1)].values()) == ref.CLASS_SIZES[4][(3, 1)] == 4
    assert got[(3, 1)] == {(2, 3): 2, (2, 2): 2}
    assert ("tally", 4, (3, 1), (2, 2)) in ref.KNOWN_DEVIATIONS


@pytest.mark.parametrize("t", [3, 4, 5, 6])
def test_class_sizes(t):
    for lam, row in var.class_tallies(t).items():
        assert sum(row.values()) == ref.CLASS_SIZES[t][lam]


def test_q3_middle_step():
    # sum over strings of Q3(a) T(a), with T the number of permutations fixing a
    for d in (2, 3, 4):
        direct = 0
        for a in itertools.product(range(d), repeat=3):
            t_a = sum(pg.matrix_element(p, a) for p in pg.enumerate_group(3))
            direct += o_plus_weight_value(a, d) ** 2 * t_a
        ff = lambda k: pg.falling_factorial(d, k)  # noqa: E731
        assert direct == 4 * ff(3) + (1 - d) ** 2 * 2 * 3 * ff(2) + (1 + d * d) ** 2 * 6 * ff(1)


# ------------------------------------------------------------- pure states

@pytest.mark.parametrize("d", [2, 3, 4])
def test_pure_brute_equals_closed_forms(d):
    closed = var.gamma_pure(d)
    for t in (3, 4, 5, 6):
        assert var.gamma_brute_pure(d, t) == closed[t]


@pytest.mark.parametrize("d", [2, 3])
def test_pure_brute_against_dense_twirl(d):
    psi = qstate.haar_pure(d, qstate.make_rng(d))
    for t in (3, 4, 5):
        q = var.q_observable(t, d).dense()
        val = np.trace(wg.twirl_dense(q, d, t) @ tensor_power(psi.data, t)).real
        assert val == pytest.approx(float(var.gamma_brute_pure(d, t)), rel=1e-10)


def test_reference_forms_at_d2():
    pub = var.gamma_pure_reference(2)
    assert pub[3] == 7
    assert var.gamma_pure(2)[3] == 13
    assert pub[4] == var.gamma_pure(2)[4]


def test_gamma6_examples():
    assert var.gamma_pure(2)[6] == Fraction(4 * 1218, 840) == Fraction(29, 5)
    assert float(var.gamma_pure(10 ** 6)[6]) == pytest.approx(4, rel=1e-4)


def test_pure_bounds():
    for d in range(2, 60):
        g = var.gamma_pure(d)
        assert all(g[t] < b for t, b in zip((3, 4, 5, 6), var.pure_bounds(d)))


def test_gamma5_example_d3():
    want = Fraction(48 * 27 + 68 * 9 + 60 * 3 + 64, 27 + 81 + 78 + 24)
    assert var.gamma_brute_pure(3, 5) == want


# ------------------------------------------------------------- mixed states

@pytest.mark.parametrize("d", [2, 3])
def test_gamma3_exact_vs_brute(d):
    rng = qstate.make_rng(30 + d)
    for _ in range(20):
        rho = qstate.random_mixed(d, rng)
        assert var.gamma3_exact(rho) == pytest.approx(var.gamma_brute(rho, 3), abs=1e-8)


def test_gamma3_exact_pure_and_mixed_limits():
    for d in (2, 3, 5):
        psi = qstate.haar_pure(d, qstate.make_rng(d))
        assert var.gamma3_exact(psi) == pytest.approx(float(var.gamma_pure(d)[3]))
        mm = np.eye(d) / d
        assert var.gamma3_exact(mm) == pytest.approx(var.gamma_brute(mm, 3))


def test_gamma6_maximally_mixed_dense():
    d, t = 2, 6
    mm = np.eye(d) / d
    q = var.q_observable(t, d).dense()
    val = np.trace(wg.twirl_dense(q, d, t) @ tensor_power(mm, t)).real
    assert np.isfinite(var.gamma_brute(mm, 6))
    assert var.gamma_brute(mm, 6) == pytest.approx(val, rel=1e-10)


def test_mixed_brute_against_dense_twirl():
    rho = qstate.random_mixed(2, qstate.make_rng(5))
    for t in (3, 4, 5):
        q = var.q_observable(t, 2).dense()
        val = np.trace(wg.twirl_dense(q, 2, t) @ tensor_power(rho.data, t)).real
        assert var.gamma_brute(rho, t) == pytest.approx(val, rel=1e-10)


def test_delta3_exact_vs_brute():
    rng = qstate.make_rng(40)
    for _ in range(20):
        rho = qstate.random_mixed(4, rng, bipartition=(2, 2))
        assert var.delta3_exact(rho) == pytest.approx(var.delta_brute(rho, 3), abs=1e-8)


def test_delta_of_pure_product_factorizes():
    rng = qstate.make_rng(41)
    for d in (2, 3):
        rho = qstate.pure_product(d, rng)
        g = var.gamma_pure(d)
        assert var.delta3_exact(rho) == pytest.approx(float(g[3]) ** 2)
        assert var.delta_brute(rho, 3) == pytest.approx(float(g[3]) ** 2)
    rho = qstate.pure_product(2, rng)
    assert var.delta_brute(rho, 4) == pytest.approx(float(var.gamma_pure(2)[4]) ** 2)


def test_delta3_needs_equal_dims():
    with pytest.raises(ValueError):
        var.delta3_exact(qstate.maximally_mixed(2, 3))


def test_variance_terms_must_be_finite():
    with pytest.raises(ValueError):
        var.VarianceTerms(1, 2, float("nan"), 3, "test")


# -------------------------------------------------------------- variances

def test_pair_overlap_counts():
    # number of ordered pairs of 3-subsets of N shots sharing k elements
    n = 8
    subsets = list(itertools.combinations(range(n), 3))
    overlap = Counter(len(set(a) & set(b)) for a in subsets for b in subsets)
    c = math.comb
    assert overlap == {0: c(n, 3) * c(n - 3, 3), 1: c(n, 3) * 3 * c(n - 3, 2),
                       2: c(n, 3) * 3 * (n - 3), 3: c(n, 3)}


def test_finite_variance_weights():
    terms = var.VarianceTerms(Fraction(7), Fraction(5), Fraction(3), Fraction(2), "test")
    for n in (3, 6, 12):
        c = math.comb
        second = (c(n - 3, 3) * 2 + 3 * c(n - 3, 2) * 3 + 3 * (n - 3) * 5 + 7) / (4 * c(n, 3))
        assert var.variance_nu_finite(n, terms, 0.5) == pytest.approx(second - 0.25)


def test_variance_limits():
    g = var.gamma_pure(3)
    inf = var.variance_nu(math.inf, g, 1.0)
    assert inf == pytest.approx(float(g[6]) / 4 - 1) and inf < 10 / 4 - 1
    assert var.variance_nu_finite(10 ** 7, g, 1.0) == pytest.approx(inf, rel=1e-4)
    assert var.variance_nu(10 ** 7, g, 1.0) == pytest.approx(inf, rel=1e-4)


def test_variance_nu_d5_nm10():
    g = var.gamma_pure(5)
    g3, g4, g5, g6 = (float(x) for x in g.values())
    want = g6 / 4 + 9 / 4 * g5 / 10 + 9 / 2 * g4 / 100 + 1.5 * g3 / (10 * 9 * 8) - 1
    assert var.variance_nu(10, g, 1.0) == pytest.approx(want)


def test_variance_mu_shifts_target():
    g = var.gamma_pure(2)
    assert var.variance_mu(12, g, 0.3, 0.2) == pytest.approx(var.variance_nu(12, g, 0.5))
    assert var.estimator_variance(2.0, 100) == 0.02


def test_variance_needs_three_shots():
    with pytest.raises(ValueError):
        var.variance_nu(2, var.gamma_pure(2), 1.0)


# ----------------------------------------------------------------- budgets

def test_bernstein_examples():
    assert var.bernstein_bound(math.inf, 10, 1) == 0
    assert var.bernstein_bound(0.1, 0, 1) == 2
    b = var.bernstein_bound(0.1, 1000, 1)
    assert b == pytest.approx(2 * math.exp(-10 / (2 + 0.2 / 3)))
    assert b == pytest.approx(0.0157, rel=0.01)
    with pytest.raises(ValueError):
        var.bernstein_bound(0, 10, 1)


def test_asymptotic_requirements():
    assert var.asymptotic_requirements(100, 0.1) == (22, 100, 2200)
    assert var.asymptotic_requirements(100, 0.05)[1] == 4 * 100
    assert var.asymptotic_requirements(25, 0.1)[0] == 9
    for D in range(2, 200):
        n = var.asymptotic_requirements(D, 0.5)[0]
        assert n ** 3 >= D * D > (n - 1) ** 3
