import numpy as np
import pytest

from whittle_assoc.chain import ThresholdPolicy
from whittle_assoc.errors import InvalidArgumentError, StructuralViolationError
from whittle_assoc.mdp import (OracleConfig, average_cost, discounted_values,
                               exhaustive_threshold, finite_horizon_discounted,
                               optimal_policy_rvi, relative_value_system,
                               solve_relative_values, threshold_of)
from whittle_assoc.model import MbsParams, SystemConfig, make_config
from whittle_assoc.oracles import expectimax_values

from conftest import tiny


def test_accept_all_tiny_rho():
    sol = solve_relative_values(ThresholdPolicy(2), 0.0, tiny(buffer=2), 0)
    assert sol.rho == pytest.approx(1.2, abs=1e-12)
    assert sol.V[0] == 0.0


@pytest.mark.parametrize("lam", [-7.0, 0.0, 3.5, 1e4])
def test_accept_all_rho_independent_of_tax(lam):
    sol = solve_relative_values(ThresholdPolicy(2), lam, tiny(buffer=2), 0)
    assert sol.rho == pytest.approx(1.2, abs=1e-9)


def _equation_residual(sol, cfg):
    from whittle_assoc.chain import build_dtmc
    P = build_dtmc(sol.policy, cfg, 0)
    x = np.arange(cfg.buffer + 1)
    c = cfg.mbs[0].holding_cost * x + sol.lam * (x > sol.policy.threshold)
    return np.abs(sol.V - (c - sol.rho + P @ sol.V)).max()


def test_relative_values_satisfy_their_equations(small_configs):
    for cfg in small_configs[:4] + [tiny()]:
        for t in (-1, 0, cfg.buffer // 2, cfg.buffer):
            for lam in (-5.0, 0.0, 2.5):
                sol = solve_relative_values(ThresholdPolicy(t), lam, cfg, 0)
                assert _equation_residual(sol, cfg) < 1e-9


def test_relative_values_affine_in_tax():
    cfg = make_config([0.78], [95], L=20, M=100, p0=0.6)
    pol = ThresholdPolicy(40)
    system = relative_value_system(pol, cfg, 0)
    V2 = solve_relative_values(pol, 2.0, cfg, 0).V
    np.testing.assert_allclose(V2, system.U + 2 * system.W, rtol=0, atol=1e-9)


def test_average_cost_examples(tiny_cfg):
    assert average_cost(ThresholdPolicy(2), 0.0, tiny(buffer=2), 0) == pytest.approx(1.2)
    assert average_cost(ThresholdPolicy(-1), 0.0, tiny_cfg, 0) == 0.0
    assert average_cost(ThresholdPolicy(-1), 5.0, tiny_cfg, 0) == pytest.approx(5.0)


def test_average_cost_matches_linear_system(small_configs):
    for cfg in small_configs[:3] + [tiny()]:
        for t in range(-1, cfg.buffer + 1):
            pol = ThresholdPolicy(t)
            assert abs(average_cost(pol, 1.7, cfg, 0)
                       - solve_relative_values(pol, 1.7, cfg, 0).rho) < 1e-8


def test_finite_horizon_base_and_myopic_cases(tiny_cfg):
    x = np.arange(11, dtype=float)
    np.testing.assert_array_equal(
        finite_horizon_discounted(0, 3.0, OracleConfig(0.9, 0), tiny_cfg, 0), x)
    for lam in (-2.0, 4.0):
        V1 = finite_horizon_discounted(1, lam, OracleConfig(0.0, 1), tiny_cfg, 0)
        np.testing.assert_allclose(V1, x + min(0.0, lam))


@pytest.mark.parametrize("steps", [1, 2, 3])
@pytest.mark.parametrize("lam", [-1.0, 0.5, 4.0])
def test_finite_horizon_matches_expectimax(tiny_cfg, steps, lam):
    fast = finite_horizon_discounted(steps, lam, OracleConfig(0.9, steps), tiny_cfg, 0)
    slow = expectimax_values(steps, lam, 0.9, tiny_cfg, 0)
    np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-10)


def test_finite_horizon_matches_expectimax_with_folded_departures():
    cfg = SystemConfig(L=2, M=2, arrival_pmf=(0.3, 0.3, 0.4), mbs=(MbsParams(0.6, 1.5),),
                       buffer=6, horizon=2, warmup=0)
    fast = finite_horizon_discounted(3, 1.0, OracleConfig(0.8, 3), cfg, 0)
    np.testing.assert_allclose(fast, expectimax_values(3, 1.0, 0.8, cfg, 0), atol=1e-10)


def test_oracle_config_validation():
    with pytest.raises(InvalidArgumentError):
        OracleConfig(beta=1.0)
    with pytest.raises(InvalidArgumentError):
        OracleConfig(beta=-0.1)


@pytest.mark.parametrize("lam,t", [(1e9, 10), (-1e9, -1)])
def test_rvi_extreme_taxes(tiny_cfg, lam, t):
    assert optimal_policy_rvi(lam, tiny_cfg, 0).policy.threshold == t


def test_rvi_tiny_matches_exhaustive(tiny_cfg):
    sol = optimal_policy_rvi(0.5, tiny_cfg, 0)
    t, rho = exhaustive_threshold(0.5, tiny_cfg, 0)
    assert sol.policy.threshold == t
    assert abs(sol.rho - rho) < 1e-8
    assert sol.V[0] == 0.0


def test_rvi_value_monotone_and_threshold_shaped(small_configs):
    for cfg in small_configs:
        for lam in (-10.0, -1.0, 0.0, 1.0, 10.0):
            sol = optimal_policy_rvi(lam, cfg, 0)
            assert np.all(np.diff(sol.V)[:cfg.buffer - cfg.M] >= -1e-9)


def test_rvi_arrival_free_reports_accept_everywhere():
    cfg = SystemConfig(L=1, M=1, arrival_pmf=(1.0, 0.0), mbs=(MbsParams(0.5, 1),),
                       buffer=5, horizon=2, warmup=0)
    sol = optimal_policy_rvi(-3.0, cfg, 0)
    assert sol.policy.threshold == 5 and sol.actions.all()


def test_threshold_of_detects_non_threshold_sets():
    assert threshold_of(np.array([1, 1, 0, 0], bool)) == 1
    assert threshold_of(np.array([0, 0, 0], bool)) == -1
    assert threshold_of(np.array([1, 1, 1], bool)) == 2
    assert threshold_of(np.array([1, 0, 0, 1], bool), interior=2) == 0
    with pytest.raises(StructuralViolationError):
        threshold_of(np.array([1, 0, 1, 0], bool))


def test_vanishing_discount(tiny_cfg):
    for lam in (3.0, 10.0):
        pol = optimal_policy_rvi(lam, tiny_cfg, 0).policy
        rho = solve_relative_values(pol, lam, tiny_cfg, 0).rho
        gaps = [abs((1 - b) * discounted_values(lam, b, tiny_cfg, 0)[0] - rho)
                for b in (0.9, 0.99, 0.999)]
        assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.05


def test_discounted_values_are_a_fixed_point(tiny_cfg):
    V = discounted_values(2.0, 0.95, tiny_cfg, 0)
    once = finite_horizon_discounted(1, 2.0, OracleConfig(0.95, 1), tiny_cfg, 0)
    # one Bellman step from V must return V
    from whittle_assoc.model import transition_kernel
    k = transition_kernel(tiny_cfg, 0)
    x = np.arange(11.0)
    TV = np.minimum(x + 0.95 * k.accept @ V, x + 2.0 + 0.95 * k.reject @ V)
    np.testing.assert_allclose(TV, V, atol=1e-9)
    assert np.all(once <= V + 1e-12)


def test_non_decreasing_differences_counterexample():
    """A stable instance whose optimal relative values bend concave at the
    switching state, so the differences property does not hold in general.
    The same sign appears with a much larger buffer, ruling out truncation."""
    for B in (60, 300):
        cfg = SystemConfig(L=3, M=3, arrival_pmf=(0.076, 0.289, 0.407, 0.228),
                           mbs=(MbsParams(0.751, 1.362),), buffer=B, horizon=2, warmup=0)
        sol = optimal_policy_rvi(10.0, cfg, 0)
        exact = solve_relative_values(sol.policy, 10.0, cfg, 0).V
        assert sol.policy.threshold == 4
        assert np.diff(exact, 2)[4] == pytest.approx(-0.3137, abs=1e-4)
