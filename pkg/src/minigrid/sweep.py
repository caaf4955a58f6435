"""Centralized-vs-decentralized sensitivity sweep over cable size and distance."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import designmilp as dm
from .economics import scale_pv_curve
from .netmodel import CableCatalog, CableSpec, NetworkModel, default_catalog
from .scenario import DesignScenario
from .solvers import get_solver

log = logging.getLogger(__name__)

__all__ = ["SweepSpec", "CellResult", "NPVGrid", "BoundaryReport", "run_sweep", "evaluate_cell",
           "classify_regions", "aggregate_single_node", "single_node_check", "scale_pv_curve",
           "DEFAULT_DISTANCES_KM", "DEFAULT_CABLES_MM2"]

DEFAULT_DISTANCES_KM = tuple(round(0.1 * k, 1) for k in range(1, 11))
DEFAULT_CABLES_MM2 = (4.0, 6.0, 10.0, 16.0, 25.0, 35.0, 50.0, 70.0, 95.0)

CENTRALIZED = "centralized"
DECENTRALIZED = "decentralized"
INFEASIBLE_CONNECTION = "infeasible_connection"

# absolute floor of the "NPV is effectively zero" band, USD
NPV_FLOOR_USD = 10.0


@dataclass(frozen=True)
class SweepSpec:
    distances_km: tuple[float, ...] = DEFAULT_DISTANCES_KM
    cable_sizes: tuple[float, ...] = DEFAULT_CABLES_MM2
    pv_cost_scale: float = 1.0
    voltage_constraints_enabled: bool = True

    def __post_init__(self):
        for name in ("distances_km", "cable_sizes"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if not self.pv_cost_scale > 0:
            raise ValueError("pv_cost_scale must be positive")
        if self.distances_km[0] <= 0:
            raise ValueError("distances must be positive")


@dataclass
class CellResult:
    distance_km: float
    cable_mm2: float
    npv: float
    label: str
    lcc_opt: float
    lcc_ref: float
    status: str
    connected: tuple[int, ...] = ()
    pv_kw: tuple[float, ...] = ()
    batt_kwh: tuple[float, ...] = ()
    # audits of every solved topology in the cell
    max_isolated_injection_kw: float = 0.0
    max_connected_size: float = 0.0
    colocation_ok: bool = True
    # exact power-flow audit of the chosen design
    audit_max_error_pct: float = 0.0
    audit_max_violation_pu: float = 0.0
    audit_failed_steps: int = 0
    min_voltage_pu: float = float("nan")
    runtime_s: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "CellResult":
        d = dict(d)
        for k in ("connected", "pv_kw", "batt_kwh"):
            d[k] = tuple(d.get(k, ()))
        return cls(**d)


@dataclass
class NPVGrid:
    spec: SweepSpec
    cells: dict[tuple[float, float], CellResult]
    mip_gap: float = 1e-4
    big_m_power: float = float("nan")

    def cell(self, distance_km: float, cable_mm2: float) -> CellResult:
        return self.cells[(float(distance_km), float(cable_mm2))]

    def _matrix(self, attr: str, dtype=float) -> np.ndarray:
        d, c = self.spec.distances_km, self.spec.cable_sizes
        out = np.empty((len(d), len(c)), dtype=dtype)
        for i, dist in enumerate(d):
            for j, cab in enumerate(c):
                out[i, j] = getattr(self.cells[(dist, cab)], attr)
        return out

    @property
    def npv(self) -> np.ndarray:
        """(distance, cable) matrix of NPV in USD."""
        return self._matrix("npv")

    @property
    def labels(self) -> np.ndarray:
        return self._matrix("label", object)

    def centralized(self) -> np.ndarray:
        return self.labels == CENTRALIZED

    def is_complete(self) -> bool:
        return all((d, c) in self.cells for d in self.spec.distances_km
                   for c in self.spec.cable_sizes)


@dataclass
class BoundaryReport:
    lower_boundary: list[tuple[float, float]] = field(default_factory=list)
    upper_boundary: list[tuple[float, float]] = field(default_factory=list)
    voltage_excluded: list[tuple[float, float]] = field(default_factory=list)

    @property
    def has_two_boundaries(self) -> bool:
        return bool(self.lower_boundary) and bool(self.upper_boundary)


def npv_tolerance(lcc: float, mip_gap: float) -> float:
    return max(NPV_FLOOR_USD, 2.0 * mip_gap * abs(lcc))


def _cell_scenario(base: DesignScenario, distance_km: float, cable: CableSpec) -> DesignScenario:
    return base.with_network(base.network.with_cable(cable, distance_km))


def evaluate_cell(base: DesignScenario, distance_km: float, cable: CableSpec, *,
                  voltage_constraints: bool = True, solver: str = "highs",
                  mip_gap: float = 1e-4, time_limit: float | None = None,
                  strategy: str = "auto") -> CellResult:
    """Optimal and decentralized-reference designs for one (distance, cable) cell."""
    sc = _cell_scenario(base, distance_km, cable)
    adapter = get_solver(solver, mip_gap, time_limit)
    Y, model = dm.linearize(sc)
    m = sc.network.m
    ref_pattern = (0,) * m
    if strategy == "milp" or (strategy == "auto" and 2 ** m > 16):
        outcomes = {}
        for pattern, force in ((ref_pattern, False), ((1,) * m, True)):
            inst = dm.build_design_model(sc, model, voltage_constraints=voltage_constraints,
                                         force_connect=force)
            try:
                outcomes[pattern] = dm.solve(inst, adapter, mip_gap, time_limit, diagnose=False)
            except dm.InfeasibleError as exc:
                outcomes[pattern] = exc
        free = dm.build_design_model(sc, model, voltage_constraints=voltage_constraints)
        opt = dm.solve(free, adapter, mip_gap, time_limit)
        outcomes.setdefault(tuple(int(b) for b in opt.connected[1:]), opt)
    else:
        outcomes = dm.enumerate_topologies(sc, model, solver=adapter, mip_gap=mip_gap,
                                           time_limit=time_limit,
                                           voltage_constraints=voltage_constraints)
        opt = dm.best_of(outcomes)
    ref = outcomes[ref_pattern]
    if not isinstance(ref, dm.DesignSolution):
        raise dm.SolveFailedError("reference_infeasible",
                                  "decentralized reference design is infeasible")
    if opt is None:
        opt = ref
    sols = [s for s in outcomes.values() if isinstance(s, dm.DesignSolution)]
    npv = ref.objective_lcc - opt.objective_lcc
    any_connection_feasible = any(isinstance(s, dm.DesignSolution) and any(b)
                                  for b, s in outcomes.items())
    if opt.is_centralized and npv > npv_tolerance(ref.objective_lcc, mip_gap):
        label = CENTRALIZED
    elif not any_connection_feasible:
        label = INFEASIBLE_CONNECTION
    else:
        label = DECENTRALIZED
    chosen = opt if label == CENTRALIZED else ref
    audit = dm.audit_solution(chosen, Y, sc.network.slack_voltage)
    iso, conn, coloc = _topology_audit(sols)
    status = "optimal" if all(s.status == "optimal" for s in sols) else "time_limit"
    return CellResult(
        distance_km=float(distance_km), cable_mm2=float(cable.size_mm2), npv=float(npv),
        label=label, lcc_opt=float(chosen.objective_lcc), lcc_ref=float(ref.objective_lcc),
        status=status, connected=tuple(int(b) for b in chosen.connected[1:]),
        pv_kw=tuple(map(float, chosen.pv_kw)), batt_kwh=tuple(map(float, chosen.batt_kwh)),
        max_isolated_injection_kw=iso, max_connected_size=conn, colocation_ok=coloc,
        audit_max_error_pct=audit.max_voltage_error_pct,
        audit_max_violation_pu=audit.max_violation_pu,
        audit_failed_steps=len(audit.failed_timesteps),
        min_voltage_pu=float(chosen.voltage.min()),
        runtime_s=float(sum(s.runtime_s for s in sols)))


def _topology_audit(solutions) -> tuple[float, float, bool]:
    iso, conn, coloc = 0.0, 0.0, True
    for s in solutions:
        for n in range(1, len(s.connected)):
            if s.connected[n]:
                conn = max(conn, float(s.pv_kw[n]), float(s.batt_kwh[n]))
            else:
                iso = max(iso, float(np.abs(s.injection[n]).max()))
        tol = 1e-6
        if np.any((s.batt_kwh > tol) & (s.pv_kw <= 0)):
            coloc = False
    return iso, conn, coloc


def _fingerprint(base: DesignScenario, spec: SweepSpec, mip_gap: float, solver: str) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(base.loads).tobytes())
    h.update(np.ascontiguousarray(base.tech.pv_production_factor).tobytes())
    h.update(repr((base.tech.pv_cost_curve, base.tech.pv_om_per_kw_yr,
                   base.tech.battery_cost_per_kwh, base.tech.battery_life_yr,
                   base.tech.battery_roundtrip_eff, base.tech.battery_c_rate,
                   base.tech.grid_energy_price, base.econ, base.voltage_limits,
                   base.power_factor, base.network, spec.pv_cost_scale,
                   spec.voltage_constraints_enabled, mip_gap, solver)).encode())
    return h.hexdigest()[:16]


def _load_checkpoint(path: Path, fingerprint: str) -> dict:
    done = {}
    if not path.exists():
        return done
    for line in path.read_text(encoding="utf-8").splitlines():
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            continue  # a torn final line from an interrupted run
        if rec.get("fingerprint") != fingerprint:
            continue
        cell = CellResult.from_json(rec["cell"])
        done[(cell.distance_km, cell.cable_mm2)] = cell
    return done


def _run_cell(args) -> CellResult:
    base, dist, cable, kwargs = args
    try:
        return evaluate_cell(base, dist, cable, **kwargs)
    except Exception as exc:  # a failed cell must not stop the sweep
        log.error("cell (%.3g km, %g mm2) failed: %s", dist, cable.size_mm2, exc)
        status = getattr(exc, "status", None) or f"error: {type(exc).__name__}: {exc}"
        nan = float("nan")
        return CellResult(float(dist), float(cable.size_mm2), nan, DECENTRALIZED, nan, nan,
                          str(status))


def run_sweep(base: DesignScenario, spec: SweepSpec = SweepSpec(), *,
              catalog: CableCatalog | None = None, workers: int = 1, solver: str = "highs",
              mip_gap: float = 1e-4, time_limit: float | None = None,
              checkpoint: str | Path | None = None, strategy: str = "auto",
              progress=None) -> NPVGrid:
    """Solve every (distance, cable) cell of ``spec`` on the base scenario.

    With ``checkpoint`` each finished cell is appended as one JSON line; a
    rerun with the same configuration skips cells already present.
    """
    catalog = catalog or default_catalog()
    if spec.pv_cost_scale != 1.0:
        base = base.with_tech(pv_cost_curve=scale_pv_curve(base.tech.pv_cost_curve,
                                                           spec.pv_cost_scale))
    fp = _fingerprint(base, spec, mip_gap, solver)
    ckpt = Path(checkpoint) if checkpoint is not None else None
    cells = _load_checkpoint(ckpt, fp) if ckpt else {}
    kwargs = dict(voltage_constraints=spec.voltage_constraints_enabled, solver=solver,
                  mip_gap=mip_gap, time_limit=time_limit, strategy=strategy)
    todo = [(base, d, catalog[c], kwargs) for d in spec.distances_km for c in spec.cable_sizes
            if (d, c) not in cells]
    if cells:
        log.info("resuming sweep: %d cells done, %d to go", len(cells), len(todo))

    def record(cell: CellResult):
        cells[(cell.distance_km, cell.cable_mm2)] = cell
        if ckpt:
            with ckpt.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"fingerprint": fp, "cell": cell.to_json()}) + "\n")
        if progress:
            progress(cell)

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell in pool.map(_run_cell, todo):
                record(cell)
    else:
        for item in todo:
            record(_run_cell(item))
    return NPVGrid(spec, cells, mip_gap, base.big_m_power)


def voltage_excluded_mask(grid: NPVGrid, unconstrained: NPVGrid | None = None) -> np.ndarray:
    """Cells kept from centralizing by the voltage limits alone."""
    if not grid.spec.voltage_constraints_enabled:
        return np.zeros(grid.npv.shape, dtype=bool)
    if unconstrained is not None:
        if (unconstrained.spec.distances_km != grid.spec.distances_km
                or unconstrained.spec.cable_sizes != grid.spec.cable_sizes):
            raise ValueError("grids have different axes")
        return unconstrained.centralized() & ~grid.centralized()
    return grid.labels == INFEASIBLE_CONNECTION


def classify_regions(grid: NPVGrid, unconstrained: NPVGrid | None = None) -> BoundaryReport:
    """Locate the cable-cost (lower) and voltage (upper) edges of the centralized region.

    Without an ``unconstrained`` companion grid, voltage exclusion is read off
    the ``infeasible_connection`` labels.
    """
    d, c = grid.spec.distances_km, grid.spec.cable_sizes
    central = grid.centralized()
    labels = grid.labels
    excluded = voltage_excluded_mask(grid, unconstrained)
    cost_excluded = (labels == DECENTRALIZED) & ~excluded
    lower, upper = [], []
    for i in range(len(d)):
        for j in range(len(c)):
            if not central[i, j]:
                continue
            if any(0 <= k < len(d) and cost_excluded[k, j] for k in (i - 1, i + 1)):
                lower.append((d[i], c[j]))
            if any(0 <= k < len(c) and excluded[i, k] for k in (j - 1, j + 1)):
                upper.append((d[i], c[j]))
    vex = [(d[i], c[j]) for i, j in zip(*np.nonzero(excluded))]
    return BoundaryReport(lower, upper, vex)


def aggregate_single_node(scenario: DesignScenario) -> DesignScenario:
    """One-node scenario serving the summed load of every node."""
    net = scenario.network
    single = NetworkModel(1, (), net.slack_voltage, net.s_base, net.v_base)
    loads = scenario.loads.sum(axis=0, keepdims=True)
    return replace(scenario, network=single, loads=loads, big_m_power=None, big_m_size=None,
                   name=f"{scenario.name}-aggregate")


# length standing in for "zero" when the equivalence check collapses the network
NEGLIGIBLE_LENGTH_KM = 1e-6


@dataclass
class SingleNodeComparison:
    lcc_multi: float
    lcc_single: float
    pv_multi: float
    pv_single: float
    batt_multi: float
    batt_single: float
    mip_gap: float

    @property
    def lcc_rel_delta(self) -> float:
        return abs(self.lcc_multi - self.lcc_single) / max(abs(self.lcc_single), 1e-12)

    @staticmethod
    def _rel(a, b) -> float:
        return abs(a - b) / max(abs(b), 1e-9) if max(abs(a), abs(b)) > 1e-9 else 0.0

    @property
    def pv_rel_delta(self) -> float:
        return self._rel(self.pv_multi, self.pv_single)

    @property
    def batt_rel_delta(self) -> float:
        return self._rel(self.batt_multi, self.batt_single)

    @property
    def passed(self) -> bool:
        return (self.lcc_rel_delta <= 2 * self.mip_gap and self.pv_rel_delta <= 0.005
                and self.batt_rel_delta <= 0.005)


def single_node_check(scenario: DesignScenario, *, solver: str = "highs", mip_gap: float = 1e-4,
                      time_limit: float | None = None) -> SingleNodeComparison:
    """Compare the all-connected, cost-free, near-zero-length network with one aggregate node."""
    net = scenario.network
    edges = tuple(replace(e, cable=replace(e.cable, cost_per_km=0.0),
                          length_km=NEGLIGIBLE_LENGTH_KM) for e in net.edges)
    multi = scenario.with_network(replace(net, edges=edges))
    adapter = get_solver(solver, mip_gap, time_limit)
    _, model = dm.linearize(multi)
    inst = dm.build_design_model(multi, model, force_connect=True if net.m else None)
    sol_m = dm.solve(inst, adapter, mip_gap, time_limit)
    single = aggregate_single_node(scenario)
    _, model1 = dm.linearize(single)
    sol_s = dm.solve(dm.build_design_model(single, model1), adapter, mip_gap, time_limit)
    return SingleNodeComparison(sol_m.objective_lcc, sol_s.objective_lcc,
                                float(sol_m.pv_kw.sum()), float(sol_s.pv_kw.sum()),
                                float(sol_m.batt_kwh.sum()), float(sol_s.batt_kwh.sum()), mip_gap)


def grid_is_finite(grid: NPVGrid) -> bool:
    return all(math.isfinite(c.npv) for c in grid.cells.values())
