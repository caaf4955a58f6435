import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import toy_line
from minigrid.lpf import InjectionProfile, compute_linearization, flat_anchor
from minigrid.netmodel import build_admittance_matrix
from minigrid.xpf import (ConvergenceError, compare_models, injection_residual, no_load_voltage,
                          slack_power, solve_power_flow, split_injection)
from oracles import newton_power_flow, two_bus_exact
from test_netmodel import radial_networks


def test_toy_line_closed_form():
    Y = build_admittance_matrix(toy_line(10.0))
    sol = solve_power_flow(Y, 1.0, [-0.1, 0.0])
    v_ref, p0_ref = two_bus_exact(10.0, -0.1)
    assert abs(sol.v[0]) == pytest.approx(v_ref, abs=1e-10)
    assert abs(sol.v[0]) == pytest.approx(0.98990, abs=5e-6)
    assert sol.slack_power.real == pytest.approx(p0_ref, abs=1e-10)
    assert sol.slack_power.real == pytest.approx(0.10102, abs=5e-6)
    assert sol.residual < 1e-9


def test_zero_injection_is_no_load_profile():
    Y = build_admittance_matrix(toy_line())
    sol = solve_power_flow(Y, 1.0, [0.0, 0.0])
    assert np.allclose(sol.v, no_load_voltage(Y, 1.0))
    assert sol.iterations <= 1


def test_divergence_reports_last_iterate():
    Y = build_admittance_matrix(toy_line(10.0))
    with pytest.raises(ConvergenceError) as info:
        solve_power_flow(Y, 1.0, [-10.0, 0.0])
    err = info.value
    assert err.last_iterate is not None
    assert np.all(np.isfinite(err.last_iterate))
    assert err.residual > 0


def test_max_iter_exhaustion():
    Y = build_admittance_matrix(toy_line(10.0))
    with pytest.raises(ConvergenceError):
        solve_power_flow(Y, 1.0, [-2.4, 0.0], max_iter=3)


def test_split_injection_shape_check():
    assert np.allclose(split_injection([1, 2, 3, 4], 2), [1 + 3j, 2 + 4j])
    with pytest.raises(ValueError):
        split_injection([1, 2, 3], 2)


def test_compare_models_attaches_timestep():
    Y = build_admittance_matrix(toy_line(10.0))
    model = compute_linearization(Y, 1.0, flat_anchor(1))
    prof = InjectionProfile(np.array([[-0.1, -10.0]]), np.zeros((1, 2)))
    with pytest.raises(ConvergenceError) as info:
        compare_models(model, Y, 1.0, prof)
    assert info.value.timestep == 1


def test_compare_models_toy_error():
    Y = build_admittance_matrix(toy_line(10.0))
    model = compute_linearization(Y, 1.0, flat_anchor(1))
    stats = compare_models(model, Y, 1.0, InjectionProfile(np.array([[-0.1]]), np.zeros((1, 1))))
    assert stats.mean_pct == pytest.approx(0.0102, abs=5e-4)
    assert stats.max_pct == stats.mean_pct


@settings(max_examples=25, deadline=None)
@given(radial_networks(max_nodes=5), st.data())
def test_matches_independent_newton_solve(net, data):
    Y = build_admittance_matrix(net)
    m = Y.m
    p = np.array(data.draw(st.lists(st.floats(-0.02, 0.01), min_size=m, max_size=m)))
    q = 0.4 * p
    sol = solve_power_flow(Y, 1.0, np.concatenate([p, q]))
    ref = newton_power_flow(Y.Y, 1.0 + 0j, p + 1j * q)
    assert np.allclose(sol.v, ref, atol=1e-8)
    assert injection_residual(Y, 1.0, sol.v, p + 1j * q) < 1e-8


@settings(max_examples=25, deadline=None)
@given(radial_networks(max_nodes=5), st.data())
def test_slack_covers_loads_and_losses(net, data):
    Y = build_admittance_matrix(net)
    m = Y.m
    p = np.array(data.draw(st.lists(st.floats(-0.02, 0.0), min_size=m, max_size=m)))
    sol = solve_power_flow(Y, 1.0, np.concatenate([p, np.zeros(m)]))
    full = np.concatenate([[1.0], sol.v])
    losses = float(np.real(np.conj(full) @ (Y.Y @ full)).real)
    s0 = slack_power(Y, 1.0, sol.v)
    assert losses >= -1e-12
    assert s0.real == pytest.approx(-p.sum() + losses, abs=1e-9)
