import numpy as np
import pytest
from conftest import absorbing, leaky, random_policy, two_cycle

from mvi import chain, generators
from mvi.errors import NotTransient, SingularSystem
from mvi.mdp import Policy


def test_absorbing_chain():
    a = chain.analyze(absorbing(0.5), [0])
    assert a.P_inf.tolist() == [[1.0]]
    assert a.H.tolist() == [[0.0]]
    assert a.gain.tolist() == [0.5]
    assert a.bias.tolist() == [0.0]


def test_periodic_two_cycle():
    a = chain.analyze(two_cycle(), [0, 0])
    np.testing.assert_allclose(a.P_inf, np.full((2, 2), 0.5), atol=1e-15)
    np.testing.assert_allclose(a.gain, [0.5, 0.5], atol=1e-15)
    # Cesaro bias of the alternating reward stream
    np.testing.assert_allclose(a.bias, [0.25, -0.25], atol=1e-14)


def test_four_state_reference_policy():
    for eps in (0.25, 0.5, 0.05):
        a = chain.analyze(generators.gen_four_state(eps), generators.four_state_optimal_policy())
        np.testing.assert_allclose(a.gain, [1.0, 1.0 - eps, 0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(a.bias, [0.0, 0.0, 0.0, -1.0], atol=1e-12)


def _series_total(T, terms=200_000):
    q = 1.0 - 1.0 / T
    t = np.arange(1, terms + 1)
    return float(np.sum(t * q ** (t - 1) / T))


def test_transient_time_geometric():
    for T in (2.0, 5.0, 17.0):
        assert chain.transient_time(leaky(T), [0, 0]) == pytest.approx(_series_total(T), rel=1e-9)
    assert chain.transient_time(two_cycle(), [0, 0]) == 0.0


def test_mkt_bad_policy_transient_time():
    m = generators.gen_mkt(2, 5, 0.1, seed=0)
    assert chain.transient_time(m, [0, 1, 1]) == pytest.approx(_series_total(5.0), rel=1e-9)


def test_expected_visits():
    T = 6.0
    a = chain.analyze(leaky(T), [0, 0])
    q = 1.0 - 1.0 / T
    assert chain.expected_visits(a, 0, 0) == pytest.approx(float(np.sum(q ** np.arange(200_000))), rel=1e-9)
    with pytest.raises(NotTransient):
        chain.expected_visits(a, 0, 1)
    b = chain.analyze(generators.gen_four_state(0.5), [0, 0, 0, 0])
    assert chain.expected_visits(b, 0, 3) == 0.0


def test_deviation_matrix_against_series():
    m = generators.gen_random(6, 2, seed=3, density=0.8)
    pi = random_policy(m, np.random.default_rng(0))
    a = chain.analyze(m, pi)
    # aperiodic irreducible blocks: sum_t (P^t - P_inf) converges geometrically
    acc = np.zeros((6, 6))
    Pt = np.eye(6)
    for _ in range(100_000):
        d = Pt - a.P_inf
        acc += d
        if np.abs(d).max() < 1e-17:
            break
        Pt = Pt @ a.P_pi
    np.testing.assert_allclose(a.H, acc, atol=1e-6)


def test_invariants_on_multichain(rng):
    m = generators.gen_random_multichain(3, 2, 2, 0.4, seed=5, n_transient=2)
    for randomized in (False, True):
        a = chain.analyze(m, random_policy(m, rng, randomized))
        n = m.n_states
        I = np.eye(n)
        np.testing.assert_allclose(a.P_inf.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(a.P_inf @ a.P_pi, a.P_inf, atol=1e-9)
        np.testing.assert_allclose(a.P_pi @ a.P_inf, a.P_inf, atol=1e-9)
        np.testing.assert_allclose(a.H @ (I - a.P_pi), I - a.P_inf, atol=1e-9)
        np.testing.assert_allclose((I - a.P_pi) @ a.H, I - a.P_inf, atol=1e-9)
        np.testing.assert_allclose(a.H @ a.P_inf, 0.0, atol=1e-9)
        np.testing.assert_allclose(a.gain + a.bias, a.r_pi + a.P_pi @ a.bias, atol=1e-9)
        np.testing.assert_allclose(a.P_inf @ a.bias, 0.0, atol=1e-9)
        assert len(a.recurrent_classes) == 3


def test_lu_pivot_guard():
    with pytest.raises(SingularSystem):
        chain.lu_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2))


def test_to_dict_is_json_ready(four):
    import json

    json.dumps(chain.analyze(four, Policy.deterministic([0, 0, 0, 2])).to_dict())
