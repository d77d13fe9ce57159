import numpy as np
import pytest

from whittle_assoc.chain import (ThresholdPolicy, build_dtmc, passive_mass,
                                 policy_stationary, stationary_distribution)
from whittle_assoc.errors import InvalidArgumentError
from whittle_assoc.model import REJECT, make_config, transition_kernel

from conftest import tiny

THREE_STATE = np.array([[.5, .5, 0], [.25, .5, .25], [0, .25, .75]])


def test_accept_all_dtmc_matches_hand_enumeration():
    np.testing.assert_allclose(build_dtmc(ThresholdPolicy(2), tiny(buffer=2), 0),
                               THREE_STATE)


def test_extreme_thresholds_pick_whole_kernels(tiny_cfg):
    kern = transition_kernel(tiny_cfg, 0)
    np.testing.assert_array_equal(build_dtmc(ThresholdPolicy(10), tiny_cfg, 0), kern.accept)
    np.testing.assert_array_equal(build_dtmc(ThresholdPolicy(-1), tiny_cfg, 0), kern.reject)


def test_threshold_policy_bounds(tiny_cfg):
    with pytest.raises(InvalidArgumentError):
        ThresholdPolicy(-2)
    with pytest.raises(InvalidArgumentError):
        build_dtmc(ThresholdPolicy(11), tiny_cfg, 0)


def test_stationary_three_state():
    np.testing.assert_allclose(stationary_distribution(THREE_STATE), [0.2, 0.4, 0.4],
                               atol=1e-14)


def test_stationary_absorbing_reject_chain(tiny_cfg):
    pi = policy_stationary(ThresholdPolicy(-1), tiny_cfg, 0)
    assert pi[0] == 1.0 and pi[1:].sum() == 0.0


def test_stationary_is_a_fixed_point_on_full_size_chain():
    cfg = make_config([0.78], [95], L=20, M=100, p0=0.6)
    P = build_dtmc(ThresholdPolicy(120), cfg, 0)
    pi = stationary_distribution(P)
    assert np.all(pi >= 0) and abs(pi.sum() - 1) < 1e-10
    assert np.abs(pi @ P - pi).max() < 1e-10


def test_stationary_power_iteration_fallback():
    # large lazy random walk: forces the iterative branch
    n = 2500
    P = np.zeros((n, n))
    idx = np.arange(n)
    P[idx, np.maximum(idx - 1, 0)] += 0.6
    P[idx, np.minimum(idx + 1, n - 1)] += 0.4
    pi = stationary_distribution(P)
    assert abs(pi.sum() - 1) < 1e-10 and np.abs(pi @ P - pi).max() < 1e-10


def test_passive_mass_examples():
    cfg = tiny(buffer=2)
    pi = policy_stationary(ThresholdPolicy(2), cfg, 0)
    assert passive_mass(ThresholdPolicy(2), pi) == 0.0
    assert passive_mass(ThresholdPolicy(-1), pi) == pytest.approx(1.0)
    pi1 = policy_stationary(ThresholdPolicy(1), cfg, 0)
    assert passive_mass(ThresholdPolicy(1), pi1) == pytest.approx(pi1[2])
    # t=1 chain by hand: rows [.5,.5,0], [.25,.5,.25], [0,.5,.5] -> pi = [1/4, 1/2, 1/4]
    np.testing.assert_allclose(pi1, [0.25, 0.5, 0.25], atol=1e-14)


def test_active_mass_non_decreasing_in_threshold(small_configs):
    for cfg in small_configs[:5]:
        sums = [policy_stationary(ThresholdPolicy(t), cfg, 0)[:t + 1].sum()
                for t in range(cfg.buffer + 1)]
        assert np.all(np.diff(sums) >= -1e-12)
        pm = [passive_mass(ThresholdPolicy(t), policy_stationary(ThresholdPolicy(t), cfg, 0))
              for t in range(-1, cfg.buffer + 1)]
        assert np.all(np.diff(pm) <= 1e-12)


def test_stable_accept_all_chain_is_positive_recurrent(small_configs):
    for cfg in small_configs:
        pi = policy_stationary(ThresholdPolicy(cfg.buffer), cfg, 0)
        assert pi[0] > 0
