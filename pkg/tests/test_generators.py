import numpy as np
import pytest

from mvi import chain, complexity, generators, oracle
from mvi.errors import EpsOutOfRange, InvalidInstance
from mvi.mdp import load, save, span


def test_splitmix_reference_stream():
    # published SplitMix64 outputs for seed 0
    rng = generators.SplitMix64(0)
    assert [rng.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]


def test_mkt_structure():
    m = generators.gen_mkt(2, 5, 0.1, seed=0)
    assert m.n_states == 3 and m.action_counts.tolist() == [1, 2, 2]
    good = generators.mkt_rewards(2, 0)
    cycle = chain.gain(m, generators.mkt_optimal_policy(2))
    np.testing.assert_allclose(cycle[1:], np.mean(good), atol=1e-15)
    assert save(generators.gen_mkt(2, 5, 0.1, seed=0)) == save(m)
    assert generators.gen_mkt(10, 5, 0.1, seed=1) != generators.gen_mkt(10, 5, 0.1, seed=2)


def test_mkt_negative_absorbing_reward_is_declared():
    m = generators.gen_mkt(300, 10, 0.5, seed=0)
    lo, hi = m.reward_range
    assert lo < 0 and hi == 1.0
    assert m.r.min() >= lo
    assert load(save(m)) == m


def test_mkt_rejects():
    with pytest.raises(InvalidInstance):
        generators.gen_mkt(0, 5, 0.1)
    with pytest.raises(InvalidInstance):
        generators.gen_mkt(2, 5, 3.0)


def test_four_state_gap_property():
    eps = 0.25
    m = generators.gen_four_state(eps)
    gt = oracle.ground_truth(m, reference=generators.four_state_optimal_policy())
    assert oracle.check_modified(m, gt.rho_star, gt.h_both).passed
    assert oracle.check_unmodified(m, gt.rho_star, gt.h_both).passed
    # any modified solution along h_unmod + c rho* needs span >= 1/eps
    for c in np.linspace(0, 20, 401):
        h = gt.h_unmod + c * gt.rho_star
        if oracle.check_modified(m, gt.rho_star, h).passed:
            assert span(h) >= 1 / eps - 1e-9
    with pytest.raises(EpsOutOfRange):
        generators.gen_four_state(1.0)


def test_single_component_constant_gain():
    m = generators.gen_random_multichain(1, 4, 2, 0.0, seed=3, n_transient=0)
    gt = oracle.ground_truth(m)
    assert np.ptp(gt.rho_star) <= 1e-12
    assert complexity.tdrop(m, gt.rho_star) == 0.0


def test_two_components_nonconstant_gain():
    m = generators.gen_random_multichain(2, 2, 2, 0.3, seed=7)
    gt = oracle.ground_truth(m)
    assert np.ptp(gt.rho_star) > 1e-6


def test_random_generators_validate_and_round_trip():
    for seed in range(5):
        for m in (
            generators.gen_random_multichain(2, 3, 2, 0.2, seed=seed, n_transient=2),
            generators.gen_random(5, 3, seed=seed, max_actions=3),
        ):
            assert load(save(m)) == m
    big = generators.gen_random_multichain(2, 3, 3, 0.2, seed=1, n_transient=1)
    oracle.ground_truth(big, cap=10**6)


def test_builtin_suite():
    for label, m, ref in generators.builtin_suite():
        oracle.ground_truth(m, reference=ref)
