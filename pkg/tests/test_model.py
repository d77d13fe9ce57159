import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whittle_assoc.errors import InvalidArgumentError
from whittle_assoc.model import (ACCEPT, REJECT, MbsParams, SystemConfig,
                                 check_stability, departure_pmf, make_config,
                                 normalize_rates, transition_kernel,
                                 transition_row, uniform_arrival_pmf)

from conftest import tiny


def test_normalize_rates_examples():
    np.testing.assert_allclose(normalize_rates([100, 50], zeta=1), [100 / 101, 50 / 101])
    np.testing.assert_allclose(normalize_rates([7, 7, 7], zeta=7), [0.5, 0.5, 0.5])


@given(st.lists(st.floats(1e-3, 1e6), min_size=1, max_size=8), st.floats(1e-6, 10))
def test_normalize_rates_inside_unit_interval_and_order_preserving(raw, zeta):
    out = np.array(normalize_rates(raw, zeta))
    assert np.all(out > 0) and out.max() < 1
    order = np.argsort(raw, kind="stable")
    assert np.all(np.diff(out[order]) >= 0)


@pytest.mark.parametrize("raw,zeta", [([1, 0], 1e-3), ([1, -2], 1e-3), ([1, 2], 0.0)])
def test_normalize_rates_rejects_bad_input(raw, zeta):
    with pytest.raises(InvalidArgumentError):
        normalize_rates(raw, zeta)


def test_departure_pmf_examples():
    np.testing.assert_allclose(departure_pmf(0, 7, 0.3), [1.0])
    np.testing.assert_allclose(departure_pmf(5, 2, 0.5), [0.25, 0.5, 0.25])
    np.testing.assert_allclose(departure_pmf(1, 2, 0.5), [0.25, 0.75])


@pytest.mark.parametrize("x,L,r", [(20, 20, 0.78), (25, 20, 0.45), (3, 1, 0.5)])
def test_departure_pmf_is_binomial_when_x_at_least_L(x, L, r):
    from math import comb
    expected = [comb(L, d) * r ** d * (1 - r) ** (L - d) for d in range(L + 1)]
    np.testing.assert_allclose(departure_pmf(x, L, r), expected, rtol=1e-12, atol=1e-300)


def test_transition_row_examples():
    np.testing.assert_allclose(transition_row(0, REJECT, tiny(buffer=2), 0), [1, 0, 0])
    np.testing.assert_allclose(transition_row(0, ACCEPT, tiny(buffer=2), 0), [0.5, 0.5, 0])
    np.testing.assert_allclose(transition_row(2, ACCEPT, tiny(buffer=2), 0), [0, 0.25, 0.75])


def test_transition_row_rejects_state_above_buffer():
    with pytest.raises(InvalidArgumentError):
        transition_row(3, ACCEPT, tiny(buffer=2), 0)


def test_kernel_rows_stochastic_and_reject_properties():
    cfg = make_config([0.78, 0.45], [95, 32], L=20, M=100, p0=0.6)
    for k in range(cfg.K):
        kern = transition_kernel(cfg, k)
        for P in (kern.accept, kern.reject):
            assert np.abs(P.sum(axis=1) - 1).max() <= 1e-12
        assert kern.reject[0, 0] == 1.0
        assert np.all(np.triu(kern.reject, 1) == 0)


def test_reject_rows_stochastically_dominated_by_accept_rows(small_configs):
    for cfg in small_configs:
        kern = transition_kernel(cfg, 0)
        ca, cr = np.cumsum(kern.accept, axis=1), np.cumsum(kern.reject, axis=1)
        assert np.all(cr >= ca - 1e-12)


def test_kernel_arrays_are_read_only():
    kern = transition_kernel(tiny(), 0)
    with pytest.raises(ValueError):
        kern.accept[0, 0] = 0.0


def test_check_stability_examples():
    cfg = make_config([0.78, 0.65, 0.56, 0.50, 0.45], [95, 75, 58, 40, 32],
                      L=20, M=100, p0=0.6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        stable, margin = check_stability(cfg)
    assert not stable and margin == pytest.approx(9 - 20.2)
    stable, margin = check_stability(SystemConfig(
        L=3, M=2, arrival_pmf=(1, 0, 0), mbs=(MbsParams(0.4, 1),), buffer=5,
        horizon=2, warmup=0))
    assert stable and margin == pytest.approx(1.2)
    stable, margin = check_stability(SystemConfig(
        L=2, M=1, arrival_pmf=(0.5, 0.5), mbs=(MbsParams(0.9, 1),), buffer=5,
        horizon=2, warmup=0))
    assert stable and margin == pytest.approx(1.3)


def test_check_stability_warns_when_unstable():
    cfg = make_config([0.45], [1], L=20, M=100, p0=0.6)
    with pytest.warns(RuntimeWarning):
        check_stability(cfg)


def test_uniform_arrival_pmf_construction():
    p = uniform_arrival_pmf(0.6, 100)
    assert p[0] == 0.6 and len(p) == 101
    assert p[1] == pytest.approx(0.004) and sum(p) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kw", [
    dict(arrival_pmf=(0.5, 0.4)),            # does not sum to 1
    dict(arrival_pmf=(1.2, -0.2)),           # entry outside [0, 1]
    dict(arrival_pmf=(1.0,)),                # wrong length
    dict(mbs=()),
    dict(L=0),
    dict(buffer=0),
    dict(warmup=10),
])
def test_config_invariants(kw):
    base = dict(L=1, M=1, arrival_pmf=(0.5, 0.5), mbs=(MbsParams(0.5, 1.0),),
                buffer=4, horizon=10, warmup=0)
    with pytest.raises(InvalidArgumentError):
        SystemConfig(**{**base, **kw})


@pytest.mark.parametrize("rate,cost", [(0.0, 1), (1.0, 1), (0.5, 0.0)])
def test_mbs_params_invariants(rate, cost):
    with pytest.raises(InvalidArgumentError):
        MbsParams(rate, cost)


def test_config_is_hashable_and_round_trips_through_dict():
    cfg = make_config([0.78, 0.65], [95, 75], L=20, M=100, p0=0.6)
    assert hash(cfg) == hash(SystemConfig(**cfg.to_dict()))
    assert SystemConfig(**cfg.to_dict()) == cfg


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.floats(0.05, 0.95),
       st.integers(0, 6), st.data())
def test_rows_stochastic_random(L, M, r, extra, data):
    p = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=M + 1, max_size=M + 1)))
    p /= p.sum()
    cfg = SystemConfig(L=L, M=M, arrival_pmf=tuple(p), mbs=(MbsParams(r, 1.0),),
                       buffer=M + extra, horizon=2, warmup=0)
    kern = transition_kernel(cfg, 0)
    assert np.abs(kern.accept.sum(1) - 1).max() <= 1e-12
    assert np.abs(kern.reject.sum(1) - 1).max() <= 1e-12
