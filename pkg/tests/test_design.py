import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_scenario
from minigrid import designmilp as dm
from minigrid.economics import present_worth_factor, pv_capital_cost
from minigrid.milp import read_lp, write_lp
from minigrid.netmodel import default_catalog, network_from_edges
from minigrid.scenario import DesignScenario
from minigrid.solvers import HighsAdapter

TOL = 1e-6


def lin(sc, anchor="mean"):
    return dm.linearize(sc, anchor)[1]


def solve(sc, anchor="mean", **kw):
    force = kw.pop("force_connect", None)
    volt = kw.pop("voltage_constraints", True)
    inst = dm.build_design_model(sc, lin(sc, anchor), force_connect=force,
                                 voltage_constraints=volt)
    return dm.solve(inst, **kw)


# --- net injection ---------------------------------------------------------

@pytest.mark.parametrize("dispatch, load, expected", [
    ({"pv": 5.0}, 3.0, 2.0),
    ({}, 3.0, -3.0),
    ({"pv": 4.0, "charge": 2.0}, 2.0, 0.0),
    ({"pv": 1.0, "discharge": 2.5, "charge": 0.5}, 1.0, 2.0),
])
def test_net_injection_expr(dispatch, load, expected):
    expr = dm.net_injection_expr(dispatch, load)
    assert dm.evaluate_expr(expr, dispatch) == pytest.approx(expected)


# --- model structure -------------------------------------------------------

def expected_counts(N, M, H, S, voltage=True, chained=0):
    continuous = 2 * N + 4 * N * H + H + 2 * M * H + (1 if voltage else 0) + N * S
    binaries = M + N + N * S
    rows = (5 * N * H + M * H + 2 * H + M * H + (1 if voltage else 0) + 2 * M * H + M + chained
            + 4 * N + N * S + 2 * N * (S - 1))
    return continuous, binaries, rows


def test_count_audit_case_study_shape():
    sc = small_scenario(hours=720)
    inst = dm.build_design_model(sc, lin(sc, "flat"))
    c = inst.meta["counts"]
    S = len(sc.tech.pv_cost_curve.slopes)
    cont, bins, rows = expected_counts(3, 2, 720, S)
    assert (c["continuous"], c["binaries"], c["rows"]) == (cont, bins, rows)
    assert c["binaries"] == 2 + 3 + 3 * S
    assert c["variables"] == inst.num_vars


def test_count_audit_chain_without_voltage(catalog):
    net = network_from_edges(4, [(0, 1, catalog[25], 0.2), (1, 2, catalog[25], 0.2),
                                 (2, 3, catalog[25], 0.2)])
    base = small_scenario()
    sc = DesignScenario(net, np.vstack([base.loads[0]] * 4), base.tech)
    inst = dm.build_design_model(sc, lin(sc, "flat"), voltage_constraints=False)
    S = len(sc.tech.pv_cost_curve.slopes)
    cont, bins, rows = expected_counts(4, 3, 24, S, voltage=False, chained=2)
    c = inst.meta["counts"]
    assert (c["continuous"], c["binaries"], c["rows"]) == (cont, bins, rows)


def test_instance_round_trips_through_lp(small):
    inst = dm.build_design_model(small, lin(small))
    back = read_lp(write_lp(inst))
    assert back.var_names == inst.var_names
    assert (back.A != inst.A).nnz == 0
    assert np.array_equal(back.integer, inst.integer)
    assert back.row_blocks == inst.row_blocks


def test_build_rejects_mismatched_model(small):
    other = small_scenario(leaves=3)
    with pytest.raises(dm.BuildError):
        dm.build_design_model(small, lin(other))


def test_build_rejects_bad_force_connect(small):
    with pytest.raises(dm.BuildError):
        dm.build_design_model(small, lin(small), force_connect={5: 1})


# --- solved designs --------------------------------------------------------

@pytest.fixture(scope="module")
def free_small():
    sc = small_scenario()
    return sc, solve(sc)


def test_decentralized_forced(small):
    sol = solve(small, anchor="flat", force_connect=False)
    assert sol.status == "optimal"
    assert not sol.connected[1:].any()
    assert np.all(sol.pv_kw > 0)
    assert np.allclose(sol.injection[1:], 0.0, atol=TOL)
    # no current flows, so the flat-anchored model reports the slack voltage everywhere
    assert np.allclose(sol.voltage, 1.0, atol=1e-9)
    report = dm.audit_solution(sol)
    assert report.max_voltage_error_pct == pytest.approx(0.0, abs=1e-9)
    assert report.exact_violations == []


def test_connected_forced(small):
    sol = solve(small, force_connect=True)
    assert sol.connected.all()
    assert np.all(sol.pv_kw[1:] <= TOL) and np.all(sol.batt_kwh[1:] <= TOL)
    assert sol.pv_kw[0] > 0


def test_free_design_beats_decentralized_on_short_thick_line(free_small):
    sc, sol = free_small
    ref = solve(sc, force_connect=False)
    assert sol.is_centralized
    assert sol.objective_lcc < ref.objective_lcc


def test_voltage_limit_below_slack_is_infeasible_voltage():
    sc = small_scenario(voltage_limits=(0.9, 0.95))
    with pytest.raises(dm.InfeasibleError) as info:
        solve(sc)
    assert info.value.family == "voltage"


def test_objective_decomposition(free_small):
    sc, sol = free_small
    assert sol.costs["total"] == pytest.approx(sol.objective_lcc, rel=1e-6)
    # spot-check components against direct arithmetic
    curve = sc.tech.pv_cost_curve
    assert sol.costs["pv_capital"] == pytest.approx(
        sum(pv_capital_cost(s, curve) for s in sol.pv_kw if s > TOL), rel=1e-9)
    assert sol.costs["pv_om_pw"] == pytest.approx(
        27.0 * sol.pv_kw.sum() * present_worth_factor(0.08, 20), rel=1e-9)
    cable = default_catalog()[95].cost_per_km * 0.1 * sol.connected[1:].sum()
    assert sol.costs["cable_capital"] == pytest.approx(cable)


def test_solution_invariants(free_small):
    sc, sol = free_small
    vmin, vmax = sc.voltage_limits
    assert sol.voltage.min() >= vmin - 1e-6 and sol.voltage.max() <= vmax + 1e-6
    for n in range(1, sc.node_count):
        if sol.connected[n]:
            assert sol.pv_kw[n] <= TOL and sol.batt_kwh[n] <= TOL
        else:
            assert np.abs(sol.injection[n]).max() <= 1e-6 * sc.big_m_power
    has_batt = sol.batt_kwh > TOL
    assert np.all(sol.pv_kw[has_batt] > 0)


def test_losses_are_non_negative_with_loaded_anchor(free_small):
    sc, sol = free_small
    eps = 1e-6 * sc.network.s_base
    assert sol.losses.min() >= -eps
    # and small compared with the power moved
    assert sol.losses.max() <= 0.05 * np.abs(sol.injection[1:]).sum(axis=0).max()


def test_energy_balance_each_hour(free_small):
    sc, sol = free_small
    gen = sol.pv_dispatch + sol.discharge - sol.charge
    net = gen - sc.loads
    assert np.allclose(net.sum(axis=0), sol.losses, atol=1e-5)


def test_battery_dynamics(free_small):
    sc, sol = free_small
    eta = np.sqrt(0.85)
    nxt = np.roll(sol.soc, -1, axis=1)
    assert np.allclose(nxt, sol.soc + eta * sol.charge - sol.discharge / eta, atol=1e-5)
    assert np.all(sol.soc <= sol.batt_kwh[:, None] + 1e-6)
    assert np.all(sol.charge <= 0.5 * sol.batt_kwh[:, None] + 1e-6)
    pf = sc.tech.pv_production_factor
    assert np.all(sol.pv_dispatch <= sol.pv_kw[:, None] * pf[None, :] + 1e-6)


def test_audit_of_centralized_design(free_small):
    sc, sol = free_small
    report = dm.audit_solution(sol)
    assert report.failed_timesteps == []
    assert report.max_voltage_error_pct <= 0.1
    assert report.exact_violations == []


def test_audit_lists_divergent_timesteps(free_small):
    sc, sol = free_small
    bad = dm.DesignSolution(**{**sol.__dict__, "injection": sol.injection.copy()})
    bad.injection[1:, 5] = -1e5  # far past the transfer limit of the line
    report = dm.audit_solution(bad)
    assert [h for h, _ in report.failed_timesteps] == [5]


def test_voltage_relaxation_never_costs_more():
    sc = small_scenario(cable_mm2=10, distance_km=0.4)
    with_v = dm.solve_design(sc, lin(sc))
    without = dm.solve_design(sc, lin(sc), voltage_constraints=False)
    assert without.objective_lcc <= with_v.objective_lcc * (1 + 2e-4)


def test_enumeration_matches_free_milp():
    sc = small_scenario(cable_mm2=16, distance_km=0.5)
    model = lin(sc)
    a = dm.solve_design(sc, model, strategy="enumerate")
    b = dm.solve_design(sc, model, strategy="milp")
    assert a.objective_lcc == pytest.approx(b.objective_lcc, rel=2e-4)
    assert list(a.connected) == list(b.connected)


def test_connection_patterns_respect_paths(catalog):
    net = network_from_edges(4, [(0, 1, catalog[25], 0.2), (1, 2, catalog[25], 0.2),
                                 (0, 3, catalog[25], 0.2)])
    pats = dm.connection_patterns(net)
    assert (0, 1, 0) not in pats  # node 2 needs node 1
    assert len(pats) == 6 and (0, 0, 0) in pats and (1, 1, 1) in pats


def test_grid_supply_is_priced():
    sc = small_scenario().with_tech(grid_energy_price=0.05)
    sol = dm.solve_design(sc, lin(sc))
    assert sol.grid_supply is not None
    assert sol.costs["grid_energy_pw"] > 0
    assert sol.costs["total"] == pytest.approx(sol.objective_lcc, rel=1e-6)


def test_single_node_model():
    from minigrid.sweep import aggregate_single_node
    sc = aggregate_single_node(small_scenario())
    sol = dm.solve_design(sc, lin(sc))
    assert sol.pv_kw.shape == (1,)
    assert sol.costs["total"] == pytest.approx(sol.objective_lcc, rel=1e-6)


def test_lp_file_solver_gives_same_design(tmp_path, small):
    from test_milp import FAKE_HIGHS
    import stat
    import sys
    exe = tmp_path / "highs"
    exe.write_text(FAKE_HIGHS.format(python=sys.executable))
    exe.chmod(exe.stat().st_mode | stat.S_IEXEC)
    from minigrid.solvers import LPFileAdapter
    inst = dm.build_design_model(small, lin(small), force_connect=True)
    a = dm.solve(inst, LPFileAdapter(exe))
    b = dm.solve(inst, HighsAdapter())
    assert a.objective_lcc == pytest.approx(b.objective_lcc, rel=1e-6)


@settings(max_examples=6, deadline=None)
@given(st.sampled_from([4, 10, 25, 95]), st.sampled_from([0.1, 0.5, 1.0]),
       st.floats(0.3, 1.5))
def test_topology_logic_property(cable, dist, scale):
    sc = small_scenario(cable, dist, load_scale=scale)
    sol = dm.solve_design(sc, lin(sc))
    for n in range(1, sc.node_count):
        if sol.connected[n]:
            assert sol.pv_kw[n] <= TOL and sol.batt_kwh[n] <= TOL
        else:
            assert np.abs(sol.injection[n]).max() <= 1e-6 * sc.big_m_power
    assert np.all(sol.pv_kw[sol.batt_kwh > TOL] > 0)
