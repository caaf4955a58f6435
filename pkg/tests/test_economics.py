import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minigrid.economics import (PVCostCurve, discount, lifecycle_cost, present_worth_factor,
                                pv_capital_cost, replacement_years, scale_pv_curve)
from minigrid.presets import DEFAULT_PV_CURVE
from oracles import annuity_factor, piecewise_cost

# fixed 5000; 0-50 kW at 3000 $/kW; 50-200 kW at 2200 $/kW
EXAMPLE = PVCostCurve(((0, 0), (50, 150000), (200, 480000)), fixed_cost=5000)


def test_zero_size_costs_nothing():
    assert pv_capital_cost(0.0, EXAMPLE) == 0.0


def test_example_point():
    assert pv_capital_cost(100.0, EXAMPLE) == pytest.approx(265000.0)
    assert pv_capital_cost(100.0, EXAMPLE) == pytest.approx(
        piecewise_cost(100.0, [(50, 3000), (150, 2200)], 5000))


def test_extrapolates_at_last_rate(caplog):
    caplog.set_level(logging.INFO, logger="minigrid.economics")
    assert pv_capital_cost(250.0, EXAMPLE) == pytest.approx(5000 + 480000 + 50 * 2200)
    assert "beyond" in caplog.text or "extrapolat" in caplog.text


def test_marginal_cost_non_increasing():
    assert EXAMPLE.marginal_cost(120.0) <= EXAMPLE.marginal_cost(30.0)


def test_scaling():
    assert scale_pv_curve(EXAMPLE, 1.0) == EXAMPLE
    assert pv_capital_cost(100.0, scale_pv_curve(EXAMPLE, 1.5)) == pytest.approx(397500.0)
    with pytest.raises(ValueError):
        scale_pv_curve(EXAMPLE, 0.0)


@pytest.mark.parametrize("bps", [
    ((0, 0), (50, 100000), (40, 150000)),  # capacities not increasing
    ((0, 0), (50, 100000), (100, 90000)),  # cost decreasing
    ((0, 0), (50, 100000), (100, 300000)),  # marginal cost rising
    ((1, 0), (50, 100000)),  # does not start at the origin
])
def test_curve_validation(bps):
    with pytest.raises(ValueError):
        PVCostCurve(bps)


def test_present_worth_factor():
    assert present_worth_factor(0.08, 20) == pytest.approx(9.8181, abs=1e-4)
    assert present_worth_factor(0.08, 20) == pytest.approx(annuity_factor(0.08, 20))
    assert present_worth_factor(0.0, 20) == 20


def test_lifecycle_examples():
    assert lifecycle_cost(100000, 1000, (), 0.08, 20) == pytest.approx(109818.1, abs=0.05)
    assert lifecycle_cost(0, 0, (), 0.05, 7) == 0.0
    rep = lifecycle_cost(0, 0, [(10, 50000)], 0.08, 20)
    assert rep == pytest.approx(23159.7, abs=0.05)
    assert discount(50000, 10, 0.08) == pytest.approx(rep)


def test_replacement_years():
    assert replacement_years(10, 20) == [10]
    assert replacement_years(7, 20) == [7, 14]
    assert replacement_years(25, 20) == []


def test_lifecycle_validation():
    with pytest.raises(ValueError):
        lifecycle_cost(1, 1, (), -0.01, 20)
    with pytest.raises(ValueError):
        lifecycle_cost(1, 1, (), 0.08, 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 400), st.floats(0.01, 400))
def test_default_curve_monotone_and_subadditive(a, b):
    c = DEFAULT_PV_CURVE
    lo, hi = sorted((a, b))
    assert pv_capital_cost(lo, c) <= pv_capital_cost(hi, c)
    # one system is never dearer than two systems of the same total size
    assert pv_capital_cost(a + b, c) <= pv_capital_cost(a, c) + pv_capital_cost(b, c) + 1e-6


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 800))
def test_default_curve_matches_tier_oracle(size):
    tiers = [(30, 2600), (70, 1900), (400, 1500)]
    assert pv_capital_cost(size, DEFAULT_PV_CURVE) == pytest.approx(
        piecewise_cost(size, tiers, 20000), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.2), st.integers(1, 40), st.floats(0, 1e5))
def test_pwf_matches_term_sum(rate, years, om):
    assert lifecycle_cost(0, om, (), rate, years) == pytest.approx(
        om * annuity_factor(rate, years), rel=1e-10, abs=1e-9)
    assert np.isfinite(present_worth_factor(rate, years))
