"""Topology, sizing and dispatch MILP with linear power-flow voltage constraints.

Units inside the model: kW, kWh and one-hour steps.  Injections are converted
to per-unit only where they meet the linear power-flow coefficients.

Node 0 is the slack node and hosts the centralized plant.  Every other node
either connects to it (``connect[n] = 1``: no local plant, injection follows the
network) or stays isolated (``connect[n] = 0``: zero net injection, local PV
and battery serve the local load).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import solvers as _solvers
from .economics import discount, lifecycle_cost, present_worth_factor, pv_capital_cost, \
    replacement_years
from .lpf import (LinearPFModel, anchor_at_mean_load, compute_linearization, flat_anchor,
                  reactive_from_real)
from .milp import INF, MILPInstance, ModelBuilder
from .netmodel import AdmittanceMatrix, build_admittance_matrix
from .scenario import DesignScenario
from .xpf import ConvergenceError, solve_power_flow

log = logging.getLogger(__name__)

# Families tried, in order, when explaining an infeasible instance.
DIAGNOSIS_ORDER = ("voltage", "topology", "balance")


class BuildError(ValueError):
    pass


class InfeasibleError(RuntimeError):
    def __init__(self, family: str | None, message: str):
        super().__init__(message)
        self.family = family


class SolveFailedError(RuntimeError):
    def __init__(self, status: str, message: str):
        super().__init__(message)
        self.status = status


def net_injection_expr(dispatch: dict, load: float) -> tuple[dict, float]:
    """Net injection ``sum(generation) - load`` as ``(coefficients, constant)``.

    ``dispatch`` maps technology names to variables (or values); battery
    ``charge`` enters negatively, everything else positively.
    """
    coefs = {k: (-1.0 if k == "charge" else 1.0) for k in dispatch}
    return coefs, -float(load)


def evaluate_expr(expr: tuple[dict, float], values: dict) -> float:
    coefs, const = expr
    return sum(c * values[k] for k, c in coefs.items()) + const


def linearize(scenario: DesignScenario, anchor: str = "mean") -> tuple[AdmittanceMatrix,
                                                                      LinearPFModel]:
    """Admittance matrix and linear model for a scenario's network.

    ``anchor="mean"`` linearizes where every non-slack node draws its mean
    load from the network (the connected operating point); ``"flat"`` uses the
    no-load voltage profile.
    """
    net = scenario.network
    Y = build_admittance_matrix(net)
    v0 = net.slack_voltage
    if anchor == "flat" or net.m == 0:
        anc = flat_anchor(net.m, v0)
    elif anchor == "mean":
        p = -scenario.loads[1:].mean(axis=1) / net.s_base
        anc = anchor_at_mean_load(Y, v0, p, reactive_from_real(p, scenario.power_factor))
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    return Y, compute_linearization(Y, v0, anc)


def _connect_bounds(scenario: DesignScenario, force_connect) -> tuple[np.ndarray, np.ndarray]:
    m = scenario.network.m
    lo, hi = np.zeros(m), np.ones(m)
    if force_connect is None:
        return lo, hi
    if isinstance(force_connect, (bool, int, np.integer)):
        lo[:] = hi[:] = float(force_connect)
        return lo, hi
    for node, val in dict(force_connect).items():
        if not 1 <= node <= m:
            raise BuildError(f"cannot fix connection of node {node}")
        lo[node - 1] = hi[node - 1] = float(val)
    return lo, hi


def build_design_model(scenario: DesignScenario, lpf_model: LinearPFModel, *,
                       voltage_constraints: bool = True, force_connect=None) -> MILPInstance:
    """Assemble the design MILP.

    ``force_connect`` fixes topology binaries: ``True``/``False`` for every
    non-slack node, or a ``{node: 0|1}`` mapping.
    """
    net = scenario.network
    N, M, H = net.node_count, net.m, scenario.horizon_hours
    if lpf_model.m != M:
        raise BuildError(f"linear model has {lpf_model.m} nodes, network has {M}")
    if net.m and not net.is_radial:
        raise BuildError("topology decisions need a radial network")
    tech, econ = scenario.tech, scenario.econ
    pf = tech.pv_production_factor
    loads = scenario.loads
    eta = tech.one_way_efficiency
    big_p, big_s = scenario.big_m_power, scenario.big_m_size
    vmin, vmax = scenario.voltage_limits
    s_base = net.s_base

    mb = ModelBuilder()
    pv_size = mb.add_vars("pv_kw", N)
    batt_size = mb.add_vars("batt_kwh", N)
    pv = mb.add_vars("pv_dispatch", (N, H))
    ch = mb.add_vars("charge", (N, H))
    dis = mb.add_vars("discharge", (N, H))
    soc = mb.add_vars("soc", (N, H))
    p0 = mb.add_vars("slack_power", H, lb=-INF)
    inj = mb.add_vars("injection", (M, H), lb=-INF)
    if voltage_constraints:
        vmag = mb.add_vars("vmag", (M, H), lb=vmin, ub=vmax, family="voltage")
        vslack = mb.add_vars("vmag_slack", (), lb=vmin, ub=vmax, family="voltage")
    else:
        vmag = mb.add_vars("vmag", (M, H), lb=0.0, family="voltage")
        vslack = None
    grid = None
    if tech.grid_energy_price is not None:
        grid = mb.add_vars("grid_supply", H)
    c_lo, c_hi = _connect_bounds(scenario, force_connect)
    connect = mb.add_vars("connect", M, lb=c_lo, ub=c_hi, integer=True)
    exists = mb.add_binaries("pv_exists", N)
    curve = tech.pv_cost_curve
    caps, slopes = curve.capacities, curve.slopes
    seg_len = np.diff(caps).astype(float)
    seg_len[-1] = max(seg_len[-1], big_s - caps[-2])
    S = seg_len.size
    seg_w = mb.add_vars("pv_segment_kw", (N, S), ub=np.broadcast_to(seg_len, (N, S)))
    seg_z = mb.add_binaries("pv_segment_on", (N, S))

    nh = lambda a: a.reshape(-1)
    pf_nh = np.broadcast_to(pf, (N, H))

    # PV dispatch up to available output; curtailment allowed
    mb.add_rows("pv_limit", "dispatch", [(nh(pv), 1.0), (np.repeat(pv_size, H), -nh(pf_nh))],
                hi=0.0)

    # battery energy balance, cyclic over the horizon
    nxt = np.roll(soc, -1, axis=1)
    mb.add_rows("soc_balance", "battery",
                [(nh(nxt), 1.0), (nh(soc), -1.0), (nh(ch), -eta), (nh(dis), 1.0 / eta)],
                lo=0.0, hi=0.0)
    rep_b = np.repeat(batt_size, H)
    mb.add_rows("soc_cap", "battery", [(nh(soc), 1.0), (rep_b, -1.0)], hi=0.0)
    mb.add_rows("charge_cap", "battery", [(nh(ch), 1.0), (rep_b, -tech.battery_c_rate)], hi=0.0)
    mb.add_rows("discharge_cap", "battery", [(nh(dis), 1.0), (rep_b, -tech.battery_c_rate)],
                hi=0.0)

    # net injection at non-slack nodes: P = pv + discharge - charge - load
    if M:
        mb.add_rows("injection_def", "balance",
                    [(nh(inj), 1.0), (nh(pv[1:]), -1.0), (nh(dis[1:]), -1.0), (nh(ch[1:]), 1.0)],
                    lo=-nh(loads[1:]), hi=-nh(loads[1:]))
    # slack node: local net generation equals the power it sends into the network
    slack_terms = [(pv[0], 1.0), (dis[0], 1.0), (ch[0], -1.0), (p0, -1.0)]
    if grid is not None:
        slack_terms.append((grid, 1.0))
    mb.add_rows("slack_balance", "balance", slack_terms, lo=loads[0], hi=loads[0])

    # linear power flow; q = p tan(acos(pf)) folded into the coefficients
    F_eff = lpf_model.slack_coefficients(scenario.power_factor) if M else np.zeros(0)
    K_eff = lpf_model.voltage_coefficients(scenario.power_factor) if M else np.zeros((0, 0))
    if M:
        inj_by_h = inj.T  # (H, M)
        mb.add_rows("slack_model", "balance",
                    [(p0, 1.0), (inj_by_h, -np.broadcast_to(F_eff, (H, M)))],
                    lo=s_base * lpf_model.d, hi=s_base * lpf_model.d)
        rows_inj = np.broadcast_to(inj_by_h[None, :, :], (M, H, M)).reshape(M * H, M)
        rows_k = np.broadcast_to((K_eff / s_base)[:, None, :], (M, H, M)).reshape(M * H, M)
        rhs = np.repeat(lpf_model.b, H)
        mb.add_rows("voltage_def", "voltage", [(nh(vmag), 1.0), (rows_inj, -rows_k)],
                    lo=rhs, hi=rhs)
    else:
        mb.add_rows("slack_model", "balance", [(p0, 1.0)], lo=0.0, hi=0.0)
    if vslack is not None:
        v0_mag = abs(net.slack_voltage)
        mb.add_rows("slack_voltage", "voltage", [(vslack.reshape(1), 1.0)], lo=v0_mag, hi=v0_mag)

    # topology
    if M:
        rep_c = np.repeat(connect, H)
        mb.add_rows("isolated_upper", "topology", [(nh(inj), 1.0), (rep_c, -big_p)], hi=0.0)
        mb.add_rows("isolated_lower", "topology", [(nh(inj), 1.0), (rep_c, big_p)], lo=0.0)
        mb.add_rows("no_local_plant", "topology", [(pv_size[1:], 1.0), (connect, big_s)],
                    hi=big_s)
        parents = net.parent_edges()
        chained = [(n, p) for n, (p, _) in sorted(parents.items()) if p != 0]
        if chained:
            mb.add_rows("connect_path", "topology",
                        [(np.array([connect[n - 1] for n, _ in chained]), 1.0),
                         (np.array([connect[p - 1] for _, p in chained]), -1.0)], hi=0.0)
    mb.add_rows("colocation", "topology", [(batt_size, 1.0), (pv_size, -big_s)], hi=0.0)

    # concave PV cost: ordered segment fill
    mb.add_rows("segment_sum", "cost", [(pv_size, 1.0), (seg_w, -np.ones((N, S)))], lo=0.0, hi=0.0)
    mb.add_rows("pv_exists_cap", "cost", [(pv_size, 1.0), (exists, -big_s)], hi=0.0)
    mb.add_rows("segment_on", "cost",
                [(nh(seg_w), 1.0), (nh(seg_z), -np.tile(seg_len, N))], hi=0.0)
    if S > 1:
        mb.add_rows("segment_full", "cost",
                    [(nh(seg_w[:, :-1]), 1.0), (nh(seg_z[:, 1:]), -np.tile(seg_len[:-1], N))],
                    lo=0.0)
        mb.add_rows("segment_order", "cost", [(nh(seg_z[:, 1:]), 1.0), (nh(seg_z[:, :-1]), -1.0)],
                    hi=0.0)
    mb.add_rows("segment_first", "cost", [(seg_z[:, 0], 1.0), (exists, -1.0)], hi=0.0)

    # objective: lifecycle cost
    pwf = present_worth_factor(econ.discount_rate, econ.analysis_years)
    rep_factor = sum(discount(1.0, yr, econ.discount_rate)
                     for yr in replacement_years(tech.battery_life_yr, econ.analysis_years))
    mb.add_objective(seg_w, np.broadcast_to(slopes, (N, S)))
    mb.add_objective(exists, curve.fixed_cost)
    mb.add_objective(pv_size, tech.pv_om_per_kw_yr * pwf)
    mb.add_objective(batt_size, tech.battery_cost_per_kwh * (1.0 + rep_factor))
    if M:
        parents = net.parent_edges()
        cable_cost = np.array([parents[n][1].cable.cost_per_km * parents[n][1].length_km
                               for n in range(1, N)])
        mb.add_objective(connect, cable_cost)
    if grid is not None:
        mb.add_objective(grid, tech.grid_energy_price * scenario.annualization_factor * pwf)

    mb.meta.update(scenario=scenario, lpf_model=lpf_model,
                   voltage_constraints=voltage_constraints, force_connect=force_connect)
    inst = mb.build()
    inst.meta["counts"] = {
        "variables": inst.num_vars,
        "binaries": inst.num_binaries,
        "integers": int(inst.integer.sum()),
        "continuous": int(inst.num_vars - inst.integer.sum()),
        "rows": inst.num_rows,
    }
    return inst


@dataclass(eq=False)
class DesignSolution:
    status: str
    objective_lcc: float
    mip_gap: float | None
    connected: np.ndarray  # per node; the slack is always connected
    pv_kw: np.ndarray
    batt_kwh: np.ndarray
    pv_dispatch: np.ndarray = field(repr=False)
    charge: np.ndarray = field(repr=False)
    discharge: np.ndarray = field(repr=False)
    soc: np.ndarray = field(repr=False)
    injection: np.ndarray = field(repr=False)  # (N, H) kW; row 0 is the slack power
    voltage: np.ndarray = field(repr=False)  # (N, H) pu; row 0 is |v0|
    slack_power: np.ndarray = field(repr=False)  # kW
    grid_supply: np.ndarray | None = field(repr=False, default=None)
    costs: dict = field(default_factory=dict)
    scenario: DesignScenario | None = field(repr=False, default=None)
    lpf_model: LinearPFModel | None = field(repr=False, default=None)
    voltage_constraints: bool = True
    runtime_s: float = 0.0

    @property
    def is_centralized(self) -> bool:
        return bool(self.connected[1:].any())

    @property
    def losses(self) -> np.ndarray:
        """Linear-model losses per hour: total net injection over all nodes (kW)."""
        return self.injection.sum(axis=0)


def cost_breakdown(scenario: DesignScenario, pv_kw, batt_kwh, connected, grid_supply=None,
                   size_tol: float = 1e-6) -> dict:
    """Lifecycle cost components recomputed from sizes and topology."""
    tech, econ = scenario.tech, scenario.econ
    pv_kw = np.where(np.asarray(pv_kw) > size_tol, pv_kw, 0.0)
    batt_kwh = np.where(np.asarray(batt_kwh) > size_tol, batt_kwh, 0.0)
    pv_cap = sum(pv_capital_cost(float(s), tech.pv_cost_curve) for s in pv_kw)
    batt_cap = tech.battery_cost_per_kwh * float(batt_kwh.sum())
    cable = 0.0
    net = scenario.network
    if net.m:
        for n, (_, e) in net.parent_edges().items():
            if connected[n]:
                cable += e.cable.cost_per_km * e.length_km
    om = tech.pv_om_per_kw_yr * float(pv_kw.sum())
    grid_yr = 0.0
    if grid_supply is not None and tech.grid_energy_price is not None:
        grid_yr = tech.grid_energy_price * float(np.sum(grid_supply)) * scenario.annualization_factor
    reps = [(yr, batt_cap) for yr in replacement_years(tech.battery_life_yr, econ.analysis_years)]
    pwf = present_worth_factor(econ.discount_rate, econ.analysis_years)
    total = lifecycle_cost(pv_cap + batt_cap + cable, om + grid_yr, reps, econ.discount_rate,
                           econ.analysis_years)
    return {
        "pv_capital": pv_cap,
        "battery_capital": batt_cap,
        "cable_capital": cable,
        "pv_om_pw": om * pwf,
        "grid_energy_pw": grid_yr * pwf,
        "battery_replacement_pw": sum(discount(c, yr, econ.discount_rate) for yr, c in reps),
        "total": total,
    }


def _diagnose(instance: MILPInstance, solver: _solvers.SolverAdapter) -> str | None:
    for family in DIAGNOSIS_ORDER:
        if family not in instance.families():
            continue
        solver.load(instance.relaxed(family))
        if solver.solve().status != _solvers.INFEASIBLE:
            return family
    return None


def solve(instance: MILPInstance, solver: _solvers.SolverAdapter | None = None,
          mip_gap: float = 1e-4, time_limit: float | None = None,
          polish: bool = True, diagnose: bool = True) -> DesignSolution:
    """Solve a design instance and unpack it into a :class:`DesignSolution`.

    With ``polish`` the binaries of the MILP incumbent are rounded and fixed and
    the remaining LP is re-solved, so isolated nodes carry exactly zero
    injection instead of integrality-tolerance residue.
    """
    solver = solver or _solvers.HighsAdapter()
    solver.set_limits(mip_gap=mip_gap, time_limit=time_limit)
    solver.load(instance)
    res = solver.solve()
    if res.status == _solvers.INFEASIBLE:
        family = _diagnose(instance, solver) if diagnose else None
        raise InfeasibleError(family, f"design problem is infeasible"
                                      f" ({family or 'unknown'} constraints)")
    if not res.has_solution:
        raise SolveFailedError(res.status, f"solver returned {res.status}: {res.message}")
    x, gap, status, runtime = res.x, res.mip_gap, res.status, res.runtime_s
    if polish and instance.integer.any():
        ints = np.flatnonzero(instance.integer)
        fixed = instance.with_fixed(ints, np.round(x[ints]))
        solver.load(fixed)
        pres = solver.solve()
        runtime += pres.runtime_s
        if pres.has_solution:
            x = pres.x
        else:
            log.warning("polish LP failed (%s); keeping MILP incumbent", pres.status)
    return unpack_solution(instance, x, status, gap, runtime)


def unpack_solution(instance: MILPInstance, x: np.ndarray, status: str = "optimal",
                    gap: float | None = None, runtime: float = 0.0) -> DesignSolution:
    sc: DesignScenario = instance.meta["scenario"]
    model: LinearPFModel = instance.meta["lpf_model"]
    N, M, H = sc.node_count, sc.network.m, sc.horizon_hours
    val = lambda name: instance.values(x, name)
    connected = np.ones(N, dtype=bool)
    connected[1:] = val("connect") > 0.5
    p0 = val("slack_power")
    injection = np.vstack([p0[None, :], val("injection").reshape(M, H)])
    voltage = np.vstack([np.full((1, H), abs(sc.network.slack_voltage)),
                         val("vmag").reshape(M, H)])
    grid = val("grid_supply") if "grid_supply" in instance.var_blocks else None
    pv_kw, batt = val("pv_kw"), val("batt_kwh")
    costs = cost_breakdown(sc, pv_kw, batt, connected, grid)
    objective = float(instance.obj @ x + instance.obj_const)
    return DesignSolution(status, objective, gap, connected, pv_kw, batt, val("pv_dispatch"),
                          val("charge"), val("discharge"), val("soc"), injection, voltage, p0,
                          grid, costs, sc, model, instance.meta.get("voltage_constraints", True),
                          runtime)


@dataclass
class AuditReport:
    max_voltage_error_pct: float
    mean_voltage_error_pct: float
    exact_violations: list = field(default_factory=list)  # (node, hour, |v| exact, excess pu)
    failed_timesteps: list = field(default_factory=list)  # (hour, message)

    @property
    def max_violation_pu(self) -> float:
        return max((v[3] for v in self.exact_violations), default=0.0)


def audit_solution(sol: DesignSolution, Y=None, v0: complex | None = None) -> AuditReport:
    """Re-solve exact power flow at the solution's injections, hour by hour."""
    sc = sol.scenario
    Y = Y if Y is not None else build_admittance_matrix(sc.network)
    v0 = sc.network.slack_voltage if v0 is None else v0
    M = Y.m
    if M == 0:
        return AuditReport(0.0, 0.0)
    vmin, vmax = sc.voltage_limits
    p = sol.injection[1:] / sc.network.s_base
    q = reactive_from_real(p, sc.power_factor)
    X = np.vstack([p, q])
    cols, inverse = np.unique(X.round(12), axis=1, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    exact = np.full((M, cols.shape[1]), np.nan)
    failed_cols = {}
    for k in range(cols.shape[1]):
        try:
            exact[:, k] = np.abs(solve_power_flow(Y, v0, cols[:, k]).v)
        except ConvergenceError as exc:
            failed_cols[k] = str(exc)
    v_exact = exact[:, inverse]
    lin = sol.voltage[1:]
    ok = ~np.isnan(v_exact)
    err = np.where(ok, 100.0 * np.abs(lin - v_exact) / np.where(ok, v_exact, 1.0), np.nan)
    report = AuditReport(float(np.nanmax(err)) if ok.any() else float("nan"),
                         float(np.nanmean(err)) if ok.any() else float("nan"))
    for h in range(sc.horizon_hours):
        if inverse[h] in failed_cols:
            report.failed_timesteps.append((h, failed_cols[inverse[h]]))
    for n, h in zip(*np.nonzero(ok)):
        v = v_exact[n, h]
        excess = max(vmin - v, v - vmax, 0.0)
        if excess > 0:
            report.exact_violations.append((int(n) + 1, int(h), float(v), float(excess)))
    return report


def connection_patterns(network) -> list[tuple[int, ...]]:
    """Every connect vector (non-slack nodes, in order) that respects path closure."""
    m = network.m
    parents = network.parent_edges()
    out = []
    for bits in range(2 ** m):
        b = tuple((bits >> k) & 1 for k in range(m))
        if all(b[n - 1] <= b[p - 1] for n, (p, _) in parents.items() if p != 0):
            out.append(b)
    return sorted(out, key=lambda b: (sum(b), b))


def enumerate_topologies(scenario: DesignScenario, lpf_model: LinearPFModel, *,
                         solver: _solvers.SolverAdapter | None = None, mip_gap: float = 1e-4,
                         time_limit: float | None = None, voltage_constraints: bool = True,
                         patterns=None) -> dict:
    """Solve the design with the topology fixed to each pattern in turn.

    Returns ``{pattern: DesignSolution | InfeasibleError}``.  The minimum over
    all patterns is the optimum of the free model.
    """
    patterns = connection_patterns(scenario.network) if patterns is None else patterns
    canon = _interchangeable_leaves(scenario)
    out = {}
    for b in map(tuple, patterns):
        key = _canonical(b, canon)
        if key in out:
            out[b] = out[key]
            continue
        inst = build_design_model(scenario, lpf_model, voltage_constraints=voltage_constraints,
                                  force_connect={n + 1: v for n, v in enumerate(key)})
        try:
            # connect is pinned by bounds, so isolated injections are already exact zeros
            out[key] = solve(inst, solver, mip_gap, time_limit, polish=False, diagnose=False)
        except InfeasibleError as exc:
            out[key] = exc
        out[b] = out[key]
    return out


def _interchangeable_leaves(scenario: DesignScenario) -> list[list[int]]:
    """Groups of slack-adjacent leaves that are identical in load and cable."""
    net = scenario.network
    parents = net.parent_edges()
    has_child = {p for p, _ in parents.values()}
    groups: dict = {}
    for n, (p, e) in parents.items():
        if p != 0 or n in has_child:
            continue
        key = (e.cable, e.length_km, scenario.loads[n].tobytes())
        groups.setdefault(key, []).append(n)
    return [g for g in groups.values() if len(g) > 1]


def _canonical(b: tuple, groups: list[list[int]]) -> tuple:
    """Within each interchangeable group, move connections to the lowest nodes."""
    b = list(b)
    for g in groups:
        ones = sum(b[n - 1] for n in g)
        for k, n in enumerate(sorted(g)):
            b[n - 1] = int(k < ones)
    return tuple(b)


def best_of(outcomes: dict, rel_tol: float = 0.0) -> DesignSolution | None:
    """Cheapest solution; near-ties go to the pattern with fewer connections."""
    sols = [(b, s) for b, s in outcomes.items() if isinstance(s, DesignSolution)]
    if not sols:
        return None
    best = min(s.objective_lcc for _, s in sols)
    near = [(sum(b), b, s) for b, s in sols if s.objective_lcc <= best * (1 + rel_tol) + 1e-9]
    return min(near, key=lambda t: (t[0], t[1]))[2] if rel_tol else \
        min(sols, key=lambda t: (t[1].objective_lcc, sum(t[0])))[1]


def solve_design(scenario: DesignScenario, lpf_model: LinearPFModel, *,
                 solver: _solvers.SolverAdapter | None = None, mip_gap: float = 1e-4,
                 time_limit: float | None = None, voltage_constraints: bool = True,
                 strategy: str = "auto", max_patterns: int = 16) -> DesignSolution:
    """Optimal design, either from the free MILP or by topology enumeration.

    Small radial networks solve much faster as a handful of fixed-topology
    problems than as one MILP with weak big-M relaxations; ``auto`` picks
    enumeration when the pattern count is at most ``max_patterns``.
    """
    if strategy not in ("auto", "milp", "enumerate"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "auto":
        strategy = "enumerate" if 2 ** scenario.network.m <= max_patterns else "milp"
    if strategy == "enumerate":
        sol = best_of(enumerate_topologies(scenario, lpf_model, solver=solver, mip_gap=mip_gap,
                                           time_limit=time_limit,
                                           voltage_constraints=voltage_constraints))
        if sol is not None:
            return sol
    inst = build_design_model(scenario, lpf_model, voltage_constraints=voltage_constraints)
    return solve(inst, solver, mip_gap, time_limit)
