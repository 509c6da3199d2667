import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from markovpred.chains import (
    OrderMTransition,
    TransitionMatrix,
    check_irreducible,
    check_order_m_reversible,
    check_reversible,
    lift_block_chain,
    lifted_stationary,
    order_m_stationary,
    parse_matrix,
    format_matrix,
    pseudo_spectral_gap,
    random_chain,
    random_reversible,
    read_matrix_file,
    simulate,
    simulate_batch,
    spectral_report,
    stationary_distribution,
    stationary_power,
    transition_counts,
    write_matrix_file,
)
from markovpred.constructions import k_state_embed, order_m_embed, sample_symmetric_T, second_order_binary, three_state
from markovpred.errors import NotReversible, NotStochastic, ReducibleChain

from oracles import stationary_eig

CYCLIC = np.array([[0.9, 0.1, 0.0], [0.0, 0.9, 0.1], [0.1, 0.0, 0.9]])


def test_transition_matrix_validation():
    with pytest.raises(NotStochastic):
        TransitionMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(NotStochastic):
        TransitionMatrix(np.array([[1.1, -0.1], [0.5, 0.5]]))


def test_stationary_examples():
    S = np.array([[0.2, 0.5, 0.3], [0.5, 0.2, 0.3], [0.3, 0.3, 0.4]])
    assert np.allclose(stationary_distribution(S), 1 / 3, atol=1e-12)
    assert np.allclose(stationary_distribution(three_state(0.2, 10)), 1 / 3, atol=1e-12)
    emb = k_state_embed(np.full((3, 3), 1 / 3), 50)
    assert np.allclose(stationary_distribution(emb.matrix), [0.5, 1 / 6, 1 / 6, 1 / 6], atol=1e-12)


def test_stationary_reducible():
    with pytest.raises(ReducibleChain):
        stationary_distribution(np.eye(3))


def test_reversibility_examples():
    S = np.array([[0.6, 0.4], [0.4, 0.6]])
    assert check_reversible(S, np.array([0.5, 0.5]))
    emb = k_state_embed(sample_symmetric_T(2, seed=0), 30)
    assert check_reversible(emb.matrix, emb.pi)
    assert not check_reversible(CYCLIC, stationary_distribution(CYCLIC))


def test_irreducible_examples():
    assert not check_irreducible(np.eye(3))
    assert check_irreducible(three_state(0.5, 100))
    B = np.zeros((4, 4))
    B[:2, :2] = 0.5
    B[2:, 2:] = 0.5
    assert not check_irreducible(B)


def test_spectral_examples():
    rep = spectral_report(three_state(0.2, 10))
    assert np.allclose(sorted(rep.eigenvalues), [0.5, 0.7, 1.0], atol=1e-12)
    assert rep.gamma_star == pytest.approx(0.3, abs=1e-12)
    a, b = 0.3, 0.9
    P = np.array([[1 - a, a], [b, 1 - b]])
    assert spectral_report(P).gamma_star == pytest.approx(1 - abs(1 - a - b), abs=1e-12)
    iid = np.tile([0.2, 0.3, 0.5], (3, 1))
    assert spectral_report(iid).gamma_star == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(NotReversible):
        spectral_report(CYCLIC)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 31))
def test_symmetrized_spectrum_matches_general(k, seed):
    P = random_reversible(k, seed=seed).table
    rep = spectral_report(P)
    ev = np.sort(np.real(np.linalg.eigvals(P)))
    assert np.allclose(np.sort(rep.eigenvalues), ev, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 31))
def test_stationary_solvers_agree(k, seed):
    P = random_chain(k, 1, seed=seed).table
    pi = stationary_distribution(P)
    assert np.allclose(pi, stationary_eig(P), atol=1e-10)
    assert np.allclose(pi, stationary_power(P), atol=1e-9)
    assert np.allclose(pi @ P, pi, atol=1e-12)


def test_simulate_examples():
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    x = simulate(P, 4, seed=0, init=np.array([1.0, 0.0, 0.0]))
    assert list(x.states) == [0, 1, 2, 0]
    one = simulate(three_state(0.2, 10), 1, seed=5)
    assert len(one) == 1


def test_simulate_lln():
    P = np.array([[0.7, 0.2, 0.1], [0.3, 0.3, 0.4], [0.25, 0.25, 0.5]])
    x = simulate(P, 10 ** 6, seed=11).states
    c = transition_counts(x, 3)
    freq = c.n_ij / c.n_i[:, None]
    assert np.abs(freq - P).max() < 0.01


def test_simulate_deterministic_seed():
    P = three_state(0.3, 20)
    a = simulate_batch(P, 50, 10, seed=7)
    b = simulate_batch(P, 50, 10, seed=7)
    assert np.array_equal(a, b)


def test_simulation_modes_agree():
    P = np.array([[0.6, 0.4], [0.1, 0.9]])
    n, trials = 20, 20000
    fa = (simulate_batch(P, n, trials, seed=1, mode="direct") == 1).mean(axis=1)
    fb = (simulate_batch(P, n, trials, seed=2, mode="rows") == 1).mean(axis=1)
    se = np.hypot(fa.std(), fb.std()) / np.sqrt(trials)
    assert abs(fa.mean() - fb.mean()) < 4 * se


def test_transition_counts_examples():
    c = transition_counts([0, 1, 0, 1], 2)
    assert list(c.n_i) == [2, 1]
    assert c.n_ij.tolist() == [[0, 2], [1, 0]]
    z = transition_counts([0], 3)
    assert z.n_i.sum() == 0 and z.n_ij.sum() == 0
    c2 = transition_counts([1, 1, 0, 1], 2, m=2)
    # contexts 11 -> index 3, 10 -> index 2
    assert c2.n_i[3] == 1 and c2.n_i[2] == 1
    assert c2.n_ij[3, 0] == 1 and c2.n_ij[2, 1] == 1
    assert c2.n_i.sum() == 2


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.lists(st.integers(0, 3), min_size=1, max_size=40))
def test_count_totals(k, m, xs):
    x = [s % k for s in xs]
    c = transition_counts(x, k, m)
    assert c.n_i.sum() == max(len(x) - m, 0)
    assert np.array_equal(c.n_i, c.n_ij.sum(axis=1))


def test_order_m_stationary_reduction():
    P = random_chain(4, 1, seed=2)
    assert np.allclose(order_m_stationary(P), stationary_distribution(P.table), atol=1e-12)


def test_order_m_embedding_stationary():
    emb = order_m_embed(3, 2, 100, seed=0)
    pi = order_m_stationary(emb.chain).reshape(3, 3)
    assert pi[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(pi[1:, 1:], 0.48 / 4, atol=1e-12)
    assert np.allclose(pi[0, 1:], 1 / 200, atol=1e-12)
    assert np.allclose(pi[1:, 0], 1 / 200, atol=1e-12)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_order_m_reversibility():
    for p in (0.0, 0.3, 1.0):
        # p = 0 traps the chain in block 22, so check against the uniform law directly
        assert check_order_m_reversible(second_order_binary(p, 10), np.full(4, 0.25))
    with pytest.raises(ReducibleChain):
        order_m_stationary(second_order_binary(0.0, 10))
    emb = order_m_embed(3, 2, 50, seed=4)
    assert check_order_m_reversible(emb.chain, order_m_stationary(emb.chain))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 31))
def test_order_m_reversible_reduces(k, seed):
    P = random_chain(k, 1, seed=seed)
    pi = stationary_distribution(P.table)
    assert check_order_m_reversible(P, pi) == check_reversible(P.table, pi)
    R = random_reversible(k, seed=seed)
    piR = stationary_distribution(R.table)
    assert check_order_m_reversible(R, piR) and check_reversible(R.table, piR)


def test_lift_block_chain():
    T = random_chain(2, 1, seed=9)
    L = lift_block_chain(T).table
    assert L.shape == (4, 4)
    assert np.allclose(L.sum(axis=1), 1.0)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                assert L[2 * a + b, 2 * b + c] == pytest.approx(T.table[b, c])
    T2 = random_chain(3, 2, seed=1)
    pi = order_m_stationary(T2)
    lift = lift_block_chain(T2)
    mu = lifted_stationary(T2, pi)
    assert np.allclose(mu, np.repeat(pi, 3) * T2.table.ravel())
    assert np.allclose(mu @ lift.table, mu, atol=1e-12)


def test_pseudo_gap_symmetric():
    P = np.array([[0.6, 0.3, 0.1], [0.3, 0.5, 0.2], [0.1, 0.2, 0.7]])
    lam2 = np.sort(np.abs(np.linalg.eigvalsh(P)))[-2]
    ps = pseudo_spectral_gap(P, r_max=1)
    assert ps.terms[0] == pytest.approx(1 - lam2 ** 2, abs=1e-10)


def test_pseudo_gap_lemma_bound_value():
    c1, c2, m = 0.5, 1.5, 1
    assert c1 ** (2 * m + 3) / (c2 * (m + 1)) == pytest.approx(1 / 96)


def test_matrix_file_roundtrip(tmp_path):
    T = random_chain(3, 2, seed=4)
    path = tmp_path / "t.txt"
    write_matrix_file(path, T)
    back = read_matrix_file(path)
    assert back.k == 3 and back.m == 2
    assert np.array_equal(back.table, T.table)
    P = three_state(0.2, 10)
    assert np.array_equal(parse_matrix(format_matrix(P)).table, P.table)


def test_order_m_row_lookup():
    T = second_order_binary(0.3, 10)
    assert np.allclose(T.row((0, 1)), [0.7, 0.3])
    assert isinstance(T, OrderMTransition)
