"""Exact scalar truncated-least-squares solver against a brute-force oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import scalar_tls_brute_force
from tlsreg.errors import EmptyInput, InputError
from tlsreg.scalar_tls import (
    ScalarMeasurementSet,
    solve_max_consensus,
    solve_scalar_tls,
    tls_cost,
)


def test_input_validation():
    with pytest.raises(InputError):
        ScalarMeasurementSet([1.0, 2.0], [1.0], 1.0)
    with pytest.raises(InputError):
        ScalarMeasurementSet([1.0], [0.0], 1.0)
    with pytest.raises(InputError):
        ScalarMeasurementSet([np.nan], [1.0], 1.0)
    with pytest.raises(InputError):
        ScalarMeasurementSet([1.0], [1.0], -1.0)
    with pytest.raises(EmptyInput):
        solve_scalar_tls(ScalarMeasurementSet(np.empty(0), np.empty(0), 1.0))
    with pytest.raises(EmptyInput):
        solve_max_consensus(ScalarMeasurementSet(np.empty(0), np.empty(0), 1.0))


def test_single_measurement_is_recovered_exactly():
    m = ScalarMeasurementSet([2.5], [0.3], 1.0)
    sol = solve_scalar_tls(m)
    assert sol.estimate == pytest.approx(2.5, abs=1e-15)
    assert sol.cost == pytest.approx(0.0, abs=1e-15)
    assert list(sol.consensus) == [0]
    assert sol.n_boundaries == 2


def test_three_measurement_fixture():
    # two overlapping unit intervals around 1 and 2 plus an isolated
    # measurement at 100: the optimum truncates the far point (cost 1)
    # and averages the near pair
    m = ScalarMeasurementSet([1.0, 2.0, 100.0], [1.0, 1.0, 1.0], 1.0)
    sol = solve_scalar_tls(m)
    assert sol.estimate == pytest.approx(1.5, abs=1e-12)
    assert sol.cost == pytest.approx(1.5, abs=1e-12)
    assert list(sol.consensus) == [0, 1]


def test_truncation_beats_all_inlier_mean():
    # values (0, 0, 3) with alphas 2 and threshold 1: averaging all three at
    # s = 1 costs 1.5, while sitting on the coincident pair at s = 0 truncates
    # the third measurement for a cost of exactly 1
    m = ScalarMeasurementSet([0.0, 0.0, 3.0], [2.0, 2.0, 2.0], 1.0)
    sol = solve_scalar_tls(m)
    assert sol.estimate == pytest.approx(0.0, abs=1e-12)
    assert sol.cost == pytest.approx(1.0, abs=1e-12)
    assert list(sol.consensus) == [0, 1]
    # consensus maximization disagrees: all three intervals overlap on [1, 2],
    # so it returns a full consensus set at a higher truncated cost
    mc = solve_max_consensus(m)
    assert len(mc.consensus) == 3
    assert mc.estimate == pytest.approx(1.5, abs=1e-12)
    assert mc.cost == pytest.approx(1.6875, abs=1e-12)


def test_smaller_threshold_shrinks_consensus():
    m = ScalarMeasurementSet([0.0, 0.0, 3.0], [2.0, 2.0, 2.0], 0.5)
    sol = solve_scalar_tls(m)
    assert sol.estimate == pytest.approx(0.0, abs=1e-12)
    assert sol.cost == pytest.approx(0.25, abs=1e-12)
    assert list(sol.consensus) == [0, 1]
    mc = solve_max_consensus(m)
    assert list(mc.consensus) == [0, 1]


def test_tls_cost_matches_definition():
    m = ScalarMeasurementSet([1.0, 2.0, 100.0], [1.0, 1.0, 1.0], 1.0)
    assert tls_cost(m, 1.5) == pytest.approx(0.25 + 0.25 + 1.0, abs=1e-15)
    assert tls_cost(m, 100.0) == pytest.approx(2.0, abs=1e-15)


def test_matches_brute_force_on_seeded_batch():
    rng = np.random.default_rng(901)
    for _ in range(200):
        k = int(rng.integers(1, 11))
        values = rng.normal(scale=3.0, size=k)
        alphas = rng.uniform(0.1, 2.0, size=k)
        c_bar = float(rng.uniform(0.3, 2.0))
        m = ScalarMeasurementSet(values, alphas, c_bar)
        sol = solve_scalar_tls(m)
        oracle_cost, _ = scalar_tls_brute_force(values, alphas, c_bar)
        assert abs(sol.cost - oracle_cost) <= 1e-10
        assert tls_cost(m, sol.estimate) == pytest.approx(sol.cost, abs=1e-12)
        expected = np.flatnonzero(
            np.abs(sol.estimate - values) <= alphas * c_bar
        )
        assert np.array_equal(sol.consensus, expected)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=8),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_shift_and_scale_equivariance(vals, seed):
    # equivariance is asserted at the cost level: mapping the base optimum
    # into the transformed problem must give the transformed optimal cost,
    # and vice versa. This stays valid even when ties make the argmin
    # non-unique.
    rng = np.random.default_rng(seed)
    values = np.asarray(vals, dtype=np.float64)
    alphas = rng.uniform(0.2, 1.5, size=values.shape[0])
    c_bar = float(rng.uniform(0.4, 1.6))
    base = solve_scalar_tls(ScalarMeasurementSet(values, alphas, c_bar))

    shift = float(rng.uniform(-20, 20))
    m_shift = ScalarMeasurementSet(values + shift, alphas, c_bar)
    shifted = solve_scalar_tls(m_shift)
    assert abs(shifted.cost - base.cost) <= 1e-8
    assert shifted.cost <= tls_cost(m_shift, base.estimate + shift) + 1e-8

    gain = float(rng.uniform(0.1, 10.0))
    m_gain = ScalarMeasurementSet(gain * values, gain * alphas, c_bar)
    scaled = solve_scalar_tls(m_gain)
    assert abs(scaled.cost - base.cost) <= 1e-8
    assert scaled.cost <= tls_cost(m_gain, gain * base.estimate) + 1e-8


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_estimate_is_global_minimum_on_dense_grid(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 9))
    m = ScalarMeasurementSet(
        rng.normal(scale=2.0, size=k),
        rng.uniform(0.2, 1.5, size=k),
        float(rng.uniform(0.4, 1.5)),
    )
    sol = solve_scalar_tls(m)
    lo = m.values.min() - m.alphas.max() * m.c_bar - 1.0
    hi = m.values.max() + m.alphas.max() * m.c_bar + 1.0
    grid = np.linspace(lo, hi, 4001)
    grid_costs = np.minimum(
        ((grid[:, None] - m.values[None, :]) / m.alphas[None, :]) ** 2,
        m.c_bar**2,
    ).sum(axis=1)
    assert sol.cost <= grid_costs.min() + 1e-9


def test_max_consensus_prefers_cardinality_over_cost():
    # a coincident pair (cost 0 if chosen) against a loose cluster of three:
    # consensus maximization must take the cluster
    m = ScalarMeasurementSet(
        [0.0, 0.0, 10.0, 10.9, 11.8], [1.0, 1.0, 1.0, 1.0, 1.0], 1.0
    )
    mc = solve_max_consensus(m)
    assert len(mc.consensus) == 3
    assert set(mc.consensus.tolist()) == {2, 3, 4}
    # while the truncated objective prefers the exact pair
    sol = solve_scalar_tls(m)
    assert set(sol.consensus.tolist()) == {0, 1}


def test_max_consensus_tie_takes_smallest_midpoint():
    m = ScalarMeasurementSet([0.0, 10.0], [1.0, 1.0], 1.0)
    mc = solve_max_consensus(m)
    assert len(mc.consensus) == 1
    assert mc.estimate < 5.0
