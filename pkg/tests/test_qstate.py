import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from negmoment import permgroup as pg
from negmoment import qstate
from negmoment.permgroup import Permutation
from negmoment.weingarten import cyclic_shifts

from oracles import (bipartite_perm_matrix, haar_unitaries, marginals_loops,
                     partial_transpose_loops, tensor_power)

W0, W1 = cyclic_shifts(3)


def _rand_state(D, seed, dims=None, rank=None):
    return qstate.random_mixed(D, qstate.make_rng(seed), rank=rank, bipartition=dims)


# ----------------------------------------------------------------- states

@pytest.mark.parametrize("d", [2, 3, 4])
def test_noisy_bell_endpoints(d):
    assert np.allclose(qstate.noisy_bell(d, 1).data, np.eye(d * d) / (d * d))
    assert qstate.moment(qstate.noisy_bell(d, 0), 2) == pytest.approx(1)


def test_noisy_bell_rejects_bad_p():
    for p in (-0.1, 1.5):
        with pytest.raises(ValueError):
            qstate.noisy_bell(2, p)


def test_bell_state_negativity_moment():
    assert qstate.negativity_moment(qstate.bell_state(2)) == pytest.approx(0.25, abs=1e-14)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_bell_pt_is_swap_over_d(d):
    pt = qstate.partial_transpose(qstate.bell_state(d))
    swap = np.zeros((d * d, d * d))
    for a, b in itertools.product(range(d), repeat=2):
        swap[b * d + a, a * d + b] = 1
    assert np.allclose(pt, swap / d)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        qstate.DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        qstate.DensityMatrix(np.array([[0.5, 0.5j], [0.5j, 0.5]]))
    with pytest.raises(ValueError):
        qstate.DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        qstate.DensityMatrix(np.eye(4) / 4, (2, 3))


def test_missing_bipartition():
    with pytest.raises(ValueError):
        qstate.negativity_moment(qstate.maximally_mixed(4))


def test_state_json_round_trip():
    rho = _rand_state(6, 1, (2, 3))
    back = qstate.DensityMatrix.from_json(rho.to_json())
    assert back.dims == (2, 3)
    assert np.array_equal(back.data, rho.data)


# ------------------------------------------------------------------- Haar

def test_haar_unitary_is_unitary():
    rng = qstate.make_rng(3)
    for d in (1, 2, 5):
        u = qstate.haar_unitary(d, rng)
        assert np.allclose(u.conj().T @ u, np.eye(d), atol=1e-12)
    assert abs(abs(qstate.haar_unitary(1, rng)[0, 0]) - 1) < 1e-12


def test_haar_first_moment():
    n, d = 100_000, 3
    u = qstate.haar_unitary(d, qstate.make_rng(4), size=(n,))
    x = np.abs(u[:, 0, 0]) ** 2
    assert abs(x.mean() - 1 / d) < 5 * x.std() / math.sqrt(n)


def test_haar_one_design_twirl():
    n, d = 100_000, 2
    rng = np.random.default_rng(8)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    u = qstate.haar_unitary(d, qstate.make_rng(5), size=(n,))
    samples = u @ x @ u.conj().transpose(0, 2, 1)
    want = np.trace(x) * np.eye(d) / d
    mean = samples.mean(0)
    for part in (np.real, np.imag):
        se = part(samples).std(0) / math.sqrt(n)
        assert np.all(np.abs(part(mean - want)) <= 5 * se + 1e-12)


def test_haar_second_moment_matches_reference_sampler():
    # E|U_00|^4 = 2/(d(d+1)) for Haar; compare with the scipy sampler too
    n, d = 50_000, 3
    ours = np.abs(qstate.haar_unitary(d, qstate.make_rng(6), size=(n,))[:, 0, 0]) ** 4
    theirs = np.abs(haar_unitaries(d, n, 6)[:, 0, 0]) ** 4
    exact = 2 / (d * (d + 1))
    for x in (ours, theirs):
        assert abs(x.mean() - exact) < 5 * x.std() / math.sqrt(n)


# -------------------------------------------------------- state algebra

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(2, 2), (2, 3), (3, 2)]))
def test_partial_transpose_matches_loops(seed, dims):
    rho = _rand_state(dims[0] * dims[1], seed, dims)
    pt = qstate.partial_transpose(rho)
    assert np.allclose(pt, partial_transpose_loops(rho.data, *dims))
    assert np.allclose(qstate.partial_transpose(pt, dims), rho.data)
    assert np.allclose(pt, pt.conj().T)
    assert np.trace(pt).real == pytest.approx(1)
    assert qstate.moment(rho, 1) == pytest.approx(1)
    assert qstate.moment(pt, 2) == pytest.approx(qstate.moment(rho, 2))


def test_log_negativity_values():
    assert qstate.log_negativity(qstate.maximally_mixed(3, 3)) == pytest.approx(0, abs=1e-12)
    assert qstate.log_negativity(qstate.bell_state(2)) == pytest.approx(1)  # log2(d)
    assert qstate.log_negativity(qstate.bell_state(4)) == pytest.approx(2)


def test_correlation_oracles():
    rho = qstate.noisy_bell(3, 0.3)
    ra, rb = marginals_loops(rho.data, 3, 3)
    want = np.trace(rho.data @ np.kron(ra, rb)).real
    assert qstate.correlation_numerator(rho) == pytest.approx(want)
    for d in (2, 3):
        assert qstate.correlation_numerator(qstate.bell_state(d)) == pytest.approx(1 / d ** 2)


def test_product_state_f2_is_one():
    rng = qstate.make_rng(9)
    rho = qstate.product_state(qstate.random_mixed(2, rng), qstate.random_mixed(3, rng))
    assert qstate.fidelity_f2(rho) == pytest.approx(1)


# ---------------------------------------------------------- measurements

def test_born_identity_gives_diagonal():
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    assert np.allclose(qstate.born_probabilities(rho, [np.eye(3)]), [0.5, 0.3, 0.2])


def test_born_matches_dense_conjugation():
    rng = qstate.make_rng(10)
    rho = qstate.random_mixed(9, rng)
    ua, ub = qstate.haar_unitary(3, rng), qstate.haar_unitary(3, rng)
    u = np.kron(ua, ub)
    want = np.real(np.diag(u @ rho.data @ u.conj().T))
    got = qstate.born_probabilities(rho, [ua, ub])
    assert np.allclose(got, want, atol=1e-12)
    assert got.sum() == pytest.approx(1, abs=1e-10)


def test_born_dimension_mismatch():
    with pytest.raises(ValueError):
        qstate.born_probabilities(np.eye(4) / 4, [np.eye(3)])


def test_bell_probabilities():
    for d in (2, 3):
        p = qstate.bell_probabilities(qstate.bell_state(d), np.eye(d), np.eye(d))
        assert p[0] == pytest.approx(1) and p.sum() == pytest.approx(1)
    rng = qstate.make_rng(11)
    rho = qstate.random_mixed(9, rng)
    ua, ub = qstate.haar_unitary(3, rng), qstate.haar_unitary(3, rng)
    b = qstate.bell_basis(3)
    u = np.kron(ua, ub)
    want = [np.real(b[:, k].conj() @ u @ rho.data @ u.conj().T @ b[:, k]) for k in range(9)]
    assert np.allclose(qstate.bell_probabilities(rho, ua, ub), want, atol=1e-12)


def test_sample_counts():
    rng = qstate.make_rng(12)
    assert list(qstate.sample_counts([1, 0, 0], 17, rng)) == [17, 0, 0]
    assert qstate.sample_counts([0.5, 0.5], 0, rng).sum() == 0
    n = 1_000_000
    c = qstate.sample_counts(np.full(4, 0.25), n, rng)
    assert c.sum() == n
    assert np.all(np.abs(c - n / 4) < 5 * math.sqrt(n * 0.25 * 0.75))
    a = qstate.sample_counts([0.2, 0.8], 50, qstate.make_rng(1))
    b = qstate.sample_counts([0.2, 0.8], 50, qstate.make_rng(1))
    assert np.array_equal(a, b)


def test_counts_from_uniforms_inverse_cdf():
    probs = np.array([[0.1, 0.6, 0.3]])
    u = np.array([[0.05, 0.1, 0.5, 0.69, 0.7, 0.99]])
    # inverse CDF: u < 0.1 -> 0, u < 0.7 -> 1, else 2
    assert list(qstate.counts_from_uniforms(probs, u)[0]) == [1, 3, 2]


# ---------------------------------------------------------------- seeds

def test_rng_reproducible_and_child_streams_pure():
    a = qstate.make_rng(5).random(4)
    assert np.array_equal(a, qstate.make_rng(5).random(4))
    root = np.random.SeedSequence(5)
    k1 = [s.generate_state(2) for s in qstate.child_seeds(root, 3)]
    k2 = [s.generate_state(2) for s in qstate.child_seeds(root, 5)[:3]]
    assert all(np.array_equal(x, y) for x, y in zip(k1, k2))
    assert not np.array_equal(k1[0], k1[1])


def test_seed_from_env(monkeypatch):
    monkeypatch.setenv("NEG_SEED", "77")
    assert qstate.seed_from_env() == 77
    assert qstate.seed_from_env(3) == 3
    monkeypatch.delenv("NEG_SEED")
    assert qstate.seed_from_env() == qstate.DEFAULT_SEED


# ------------------------------------------------ permutation expectations

def _oracle_expectation(rho, pi, sigma, da, db):
    w = bipartite_perm_matrix(pi.mapping, sigma.mapping, da, db)
    return np.trace(w @ tensor_power(rho, pi.size))


@pytest.mark.parametrize("seed", range(3))
def test_dense_expectation_matches_explicit_operators(seed):
    rho = _rand_state(4, seed, (2, 2))
    for pi, sigma in itertools.product(pg.enumerate_group(3), repeat=2):
        got = qstate.permutation_expectation(rho, pi, sigma, method="dense")
        assert got == pytest.approx(_oracle_expectation(rho.data, pi, sigma, 2, 2), abs=1e-12)


def test_equal_cycles_give_global_moment():
    rho = _rand_state(6, 3, (2, 3))
    got = qstate.permutation_expectation(rho, W0, W0)
    assert got == pytest.approx(qstate.moment(rho, 3), abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_bell_cross_cycle_value(d):
    got = qstate.permutation_expectation(qstate.bell_state(d), W0, W1)
    assert got == pytest.approx(1 / d ** 2, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_schmidt_and_dense_paths_agree(seed):
    rho = qstate.haar_pure(4, qstate.make_rng(seed), bipartition=(2, 2))
    for pi, sigma in itertools.product(pg.enumerate_group(3), repeat=2):
        a = qstate.permutation_expectation(rho, pi, sigma, method="schmidt")
        b = qstate.permutation_expectation(rho, pi, sigma, method="dense")
        assert a == pytest.approx(b, abs=1e-10)


def test_expectations_bounded_by_one():
    rho = _rand_state(4, 21, (2, 2))
    for t in (2, 3, 4):
        for pi, sigma in itertools.product(pg.enumerate_group(t), repeat=2):
            assert abs(qstate.permutation_expectation(rho, pi, sigma)) <= 1 + 1e-12


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3)])
def test_negativity_moment_permutation_form(dims):
    rho = _rand_state(dims[0] * dims[1], 13, dims)
    via_perm = qstate.permutation_expectation(rho, W0, W1)
    assert via_perm == pytest.approx(qstate.negativity_moment(rho), abs=1e-10)


def test_dense_cap_refuses_large_mixed():
    rho = _rand_state(9, 1, (3, 3))
    t4 = pg.enumerate_group(4)[5]
    with pytest.raises(ValueError):
        qstate.permutation_expectation(rho, t4, t4)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_renyi_sandwich(d):
    rng = qstate.make_rng(100 + d)
    for _ in range(3):
        rho = qstate.haar_pure(d * d, rng, bipartition=(d, d))
        ra = qstate.reduced(rho, "A")
        for t in (2, 3, 4):
            d0 = 2 ** qstate.renyi_entropy(ra, 0)
            dt = 2 ** qstate.renyi_entropy(ra, t)
            for pi, sigma in itertools.product(pg.enumerate_group(t), repeat=2):
                beta = pg.compose(sigma, pg.inverse(pi))
                k = beta.num_cycles() - t
                chi = qstate.permutation_expectation(rho, pi, sigma, method="schmidt")
                assert d0 ** k - 1e-12 <= chi <= dt ** k + 1e-12
