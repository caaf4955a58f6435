"""Scenario files: UTF-8 JSON with optional CSV profile references.

Layout (every block except ``network`` and ``loads`` may be omitted)::

    {
      "name": "village-3",
      "horizon_hours": 720,
      "network": {"star": {"leaves": 2, "cable_mm2": 95, "length_km": 0.1}},
      "loads": {"preset": "village"},
      "technology": {"pv_production_factor": {"preset": "equatorial"}},
      "economics": {"discount_rate": 0.08, "analysis_years": 20},
      "voltage_limits": [0.9, 1.1],
      "power_factor": 0.9
    }

A profile is a list of numbers (24 or H entries), ``{"csv": "file.csv"}`` with
``hour,value`` rows, ``{"preset": name}`` or ``{"constant": value}``.  ``loads`` is either one profile
applied to every node or a list with one profile per node, slack first.
Relative CSV paths resolve against the scenario file's directory.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import presets
from .economics import PVCostCurve
from .netmodel import CableCatalog, CableSpec, Edge, NetworkModel, default_catalog, star_network
from .scenario import DesignScenario, Economics, TechnologyParams, tile_profile


class ConfigError(ValueError):
    """Invalid scenario content; the message names the offending field."""


LOAD_PRESETS = {"village": presets.VILLAGE_LOAD_KW}
PRODUCTION_PRESETS = {"equatorial": presets.production_factor}

_TOP_KEYS = {"name", "horizon_hours", "network", "loads", "technology", "economics",
             "voltage_limits", "power_factor", "big_m_power", "big_m_size", "cable_catalog"}
_NETWORK_KEYS = {"nodes", "edges", "star", "slack_voltage", "s_base_kva", "v_base_v"}
_STAR_KEYS = {"leaves", "cable_mm2", "length_km"}
_EDGE_KEYS = {"from", "to", "cable_mm2", "cable", "length_km"}
_CABLE_KEYS = {"size_mm2", "g_per_km", "b_per_km", "cost_per_km"}
_TECH_KEYS = {"pv_cost_curve", "pv_production_factor", "pv_om_per_kw_yr",
              "battery_cost_per_kwh", "battery_life_yr", "battery_roundtrip_eff",
              "battery_c_rate", "grid_energy_price"}
_CURVE_KEYS = {"breakpoints", "fixed_cost"}
_ECON_KEYS = {"discount_rate", "analysis_years"}


def _check_keys(obj, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r}")
    return obj


def read_profile_csv(path: Path) -> np.ndarray:
    """Read ``hour,value`` rows (header optional) into an array ordered by hour."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((int(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if k == 0:
                    continue  # header
                raise ConfigError(f"{path}: bad row {k + 1}: {row!r}")
    rows.sort()
    hours = [h for h, _ in rows]
    if hours != list(range(len(rows))):
        raise ConfigError(f"{path}: hours must run 0..{len(rows) - 1} without gaps")
    return np.array([v for _, v in rows])


def _profile(spec, hours: int, where: str, base: Path, presets_: dict) -> np.ndarray:
    if isinstance(spec, dict):
        if set(spec) == {"csv"}:
            path = base / spec["csv"]
            if not path.is_file():
                raise ConfigError(f"{where}: profile file {str(path)!r} is not readable")
            arr = read_profile_csv(path)
        elif set(spec) == {"constant"}:
            arr = np.full(hours, float(spec["constant"]))
        elif set(spec) == {"preset"}:
            name = spec["preset"]
            if name not in presets_:
                raise ConfigError(f"{where}: unknown preset {name!r} "
                                  f"(known: {', '.join(sorted(presets_))})")
            src = presets_[name]
            arr = np.asarray(src(hours) if callable(src) else src, dtype=float)
        else:
            raise ConfigError(f"{where}: profile object needs exactly one of 'csv', 'preset' "
                              f"or 'constant'")
    elif isinstance(spec, list) and all(isinstance(v, (int, float)) for v in spec):
        arr = np.asarray(spec, dtype=float)
    else:
        raise ConfigError(f"{where}: expected a list of numbers, {{'csv': ...}} or {{'preset': ...}}")
    try:
        return tile_profile(arr, hours)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _cable(edge: dict, catalog: CableCatalog, where: str) -> CableSpec:
    if ("cable" in edge) == ("cable_mm2" in edge):
        raise ConfigError(f"{where}: give exactly one of 'cable_mm2' or 'cable'")
    if "cable_mm2" in edge:
        try:
            return catalog[edge["cable_mm2"]]
        except KeyError:
            raise ConfigError(f"{where}.cable_mm2: {edge['cable_mm2']} mm2 is not in the "
                              f"cable catalog") from None
    spec = _check_keys(edge["cable"], _CABLE_KEYS, f"{where}.cable")
    missing = _CABLE_KEYS - set(spec)
    if missing:
        raise ConfigError(f"{where}.cable: missing {sorted(missing)}")
    try:
        return CableSpec(float(spec["size_mm2"]), complex(spec["g_per_km"], spec["b_per_km"]),
                         float(spec["cost_per_km"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.cable: {exc}") from None


def _network(spec: dict, catalog: CableCatalog) -> NetworkModel:
    _check_keys(spec, _NETWORK_KEYS, "network")
    kw = {}
    if "slack_voltage" in spec:
        sv = spec["slack_voltage"]
        kw["slack_voltage"] = complex(*sv) if isinstance(sv, list) else complex(sv)
    if "s_base_kva" in spec:
        kw["s_base"] = float(spec["s_base_kva"])
    if "v_base_v" in spec:
        kw["v_base"] = float(spec["v_base_v"])
    try:
        if "star" in spec:
            if "edges" in spec or "nodes" in spec:
                raise ConfigError("network: 'star' cannot be combined with 'nodes'/'edges'")
            star = _check_keys(spec["star"], _STAR_KEYS, "network.star")
            missing = _STAR_KEYS - set(star)
            if missing:
                raise ConfigError(f"network.star: missing {sorted(missing)}")
            return star_network(int(star["leaves"]), _cable(star, catalog, "network.star"),
                                float(star["length_km"]), **kw)
        if "nodes" not in spec:
            raise ConfigError("network: missing 'nodes' (or use 'star')")
        edges = []
        for k, e in enumerate(spec.get("edges", [])):
            where = f"network.edges[{k}]"
            _check_keys(e, _EDGE_KEYS, where)
            for req in ("from", "to", "length_km"):
                if req not in e:
                    raise ConfigError(f"{where}: missing {req!r}")
            edges.append(Edge(int(e["from"]), int(e["to"]), _cable(e, catalog, where),
                              float(e["length_km"])))
        return NetworkModel(int(spec["nodes"]), tuple(edges), **kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"network: {exc}") from None


def _curve(spec: dict) -> PVCostCurve:
    _check_keys(spec, _CURVE_KEYS, "technology.pv_cost_curve")
    try:
        return PVCostCurve(tuple(tuple(map(float, bp)) for bp in spec["breakpoints"]),
                           float(spec.get("fixed_cost", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"technology.pv_cost_curve: {exc}") from None


def scenario_from_dict(doc: dict, base_dir: str | Path = ".") -> DesignScenario:
    """Validate a parsed scenario document and apply defaults."""
    base = Path(base_dir)
    _check_keys(doc, _TOP_KEYS, "scenario")
    for req in ("network", "loads"):
        if req not in doc:
            raise ConfigError(f"scenario: missing required block {req!r}")
    catalog = default_catalog()
    if "cable_catalog" in doc:
        path = base / doc["cable_catalog"]
        if not path.is_file():
            raise ConfigError(f"cable_catalog: {str(path)!r} is not readable")
        try:
            catalog = CableCatalog.from_csv(path)
        except ValueError as exc:
            raise ConfigError(f"cable_catalog: {exc}") from None
    hours = doc.get("horizon_hours", presets.CASE_STUDY_HOURS)
    if not isinstance(hours, int) or hours < 1:
        raise ConfigError("horizon_hours: must be a positive integer")
    net = _network(doc["network"], catalog)

    loads_spec = doc["loads"]
    if isinstance(loads_spec, list) and loads_spec and not all(
            isinstance(v, (int, float)) for v in loads_spec):
        if len(loads_spec) != net.node_count:
            raise ConfigError(f"loads: {len(loads_spec)} profiles for {net.node_count} nodes")
        loads = np.vstack([_profile(p, hours, f"loads[{k}]", base, LOAD_PRESETS)
                           for k, p in enumerate(loads_spec)])
    else:
        row = _profile(loads_spec, hours, "loads", base, LOAD_PRESETS)
        loads = np.vstack([row] * net.node_count)

    tech_doc = dict(_check_keys(doc.get("technology", {}), _TECH_KEYS, "technology"))
    curve = _curve(tech_doc.pop("pv_cost_curve")) if "pv_cost_curve" in tech_doc \
        else presets.DEFAULT_PV_CURVE
    pf_spec = tech_doc.pop("pv_production_factor", {"preset": "equatorial"})
    pf = _profile(pf_spec, hours, "technology.pv_production_factor", base, PRODUCTION_PRESETS)
    try:
        tech = TechnologyParams(pv_cost_curve=curve, pv_production_factor=pf, **tech_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"technology: {exc}") from None
    econ_doc = _check_keys(doc.get("economics", {}), _ECON_KEYS, "economics")
    try:
        econ = Economics(**econ_doc)
        limits = tuple(doc.get("voltage_limits", (0.9, 1.1)))
        if len(limits) != 2:
            raise ValueError("voltage_limits must be a [V_min, V_max] pair")
        return DesignScenario(network=net, loads=loads, tech=tech, econ=econ,
                              voltage_limits=limits,
                              power_factor=float(doc.get("power_factor", 0.9)),
                              big_m_power=doc.get("big_m_power"),
                              big_m_size=doc.get("big_m_size"),
                              name=str(doc.get("name", "scenario")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from None


def parse_scenario(path: str | Path) -> DesignScenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc, path.parent)


def _cable_dict(c: CableSpec) -> dict:
    return {"size_mm2": c.size_mm2, "g_per_km": c.admittance_per_km.real,
            "b_per_km": c.admittance_per_km.imag, "cost_per_km": c.cost_per_km}


def scenario_to_dict(sc: DesignScenario) -> dict:
    """Fully explicit document; :func:`scenario_from_dict` rebuilds an equal scenario."""
    net, tech = sc.network, sc.tech
    return {
        "name": sc.name,
        "horizon_hours": sc.horizon_hours,
        "network": {
            "nodes": net.node_count,
            "edges": [{"from": e.i, "to": e.j, "length_km": e.length_km,
                       "cable": _cable_dict(e.cable)} for e in net.edges],
            "slack_voltage": [net.slack_voltage.real, net.slack_voltage.imag],
            "s_base_kva": net.s_base,
            "v_base_v": net.v_base,
        },
        "loads": [row.tolist() for row in sc.loads],
        "technology": {
            "pv_cost_curve": {"breakpoints": [list(bp) for bp in tech.pv_cost_curve.breakpoints],
                              "fixed_cost": tech.pv_cost_curve.fixed_cost},
            "pv_production_factor": tech.pv_production_factor.tolist(),
            "pv_om_per_kw_yr": tech.pv_om_per_kw_yr,
            "battery_cost_per_kwh": tech.battery_cost_per_kwh,
            "battery_life_yr": tech.battery_life_yr,
            "battery_roundtrip_eff": tech.battery_roundtrip_eff,
            "battery_c_rate": tech.battery_c_rate,
            "grid_energy_price": tech.grid_energy_price,
        },
        "economics": {"discount_rate": sc.econ.discount_rate,
                      "analysis_years": sc.econ.analysis_years},
        "voltage_limits": list(sc.voltage_limits),
        "power_factor": sc.power_factor,
        "big_m_power": sc.big_m_power,
        "big_m_size": sc.big_m_size,
    }


def dump_scenario(sc: DesignScenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2) + "\n"


def scenarios_equal(a: DesignScenario, b: DesignScenario) -> bool:
    ta, tb = a.tech, b.tech
    return (a.network == b.network and np.array_equal(a.loads, b.loads)
            and np.array_equal(ta.pv_production_factor, tb.pv_production_factor)
            and ta.pv_cost_curve == tb.pv_cost_curve
            and all(getattr(ta, f.name) == getattr(tb, f.name) for f in fields(ta)
                    if f.name not in ("pv_production_factor", "pv_cost_curve"))
            and a.econ == b.econ and a.voltage_limits == b.voltage_limits
            and a.power_factor == b.power_factor and a.big_m_power == b.big_m_power
            and a.big_m_size == b.big_m_size and a.name == b.name)
