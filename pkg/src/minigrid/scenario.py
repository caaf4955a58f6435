"""Design scenario: network, loads, technology and economic parameters."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .economics import PVCostCurve
from .netmodel import NetworkModel

DAYLIGHT_THRESHOLD = 0.1


@dataclass(frozen=True, eq=False)
class TechnologyParams:
    pv_cost_curve: PVCostCurve
    pv_production_factor: np.ndarray = field(repr=False)
    pv_om_per_kw_yr: float = 27.0
    battery_cost_per_kwh: float = 500.0
    battery_life_yr: float = 10.0
    battery_roundtrip_eff: float = 0.85
    battery_c_rate: float = 0.5
    grid_energy_price: float | None = None  # slack-node supply, USD/kWh

    def __post_init__(self):
        pf = np.asarray(self.pv_production_factor, dtype=float).reshape(-1)
        if np.any(pf < 0) or np.any(pf > 1):
            raise ValueError("pv_production_factor must lie in [0, 1]")
        object.__setattr__(self, "pv_production_factor", pf)
        if not 0 < self.battery_roundtrip_eff <= 1:
            raise ValueError("battery_roundtrip_eff must be a fraction in (0,1]")
        if self.battery_c_rate <= 0:
            raise ValueError("battery_c_rate must be positive")
        if self.battery_cost_per_kwh < 0 or self.pv_om_per_kw_yr < 0:
            raise ValueError("costs must be non-negative")
        if self.battery_life_yr <= 0:
            raise ValueError("battery_life_yr must be positive")
        if self.grid_energy_price is not None and self.grid_energy_price < 0:
            raise ValueError("grid_energy_price must be non-negative")

    @property
    def one_way_efficiency(self) -> float:
        return float(np.sqrt(self.battery_roundtrip_eff))


@dataclass(frozen=True)
class Economics:
    discount_rate: float = 0.08
    analysis_years: int = 20

    def __post_init__(self):
        if self.discount_rate < 0:
            raise ValueError("discount_rate must be non-negative")
        if self.analysis_years < 1:
            raise ValueError("analysis_years must be at least 1")


@dataclass(frozen=True, eq=False)
class DesignScenario:
    """Everything needed to build the design MILP.

    ``loads`` is ``(node_count, H)`` in kW, slack row first.  ``big_m_power``
    and ``big_m_size`` default to values derived from the peak total load.
    """

    network: NetworkModel
    loads: np.ndarray = field(repr=False)
    tech: TechnologyParams
    econ: Economics = Economics()
    voltage_limits: tuple[float, float] = (0.9, 1.1)
    power_factor: float = 0.9
    big_m_power: float | None = None
    big_m_size: float | None = None
    name: str = "scenario"

    def __post_init__(self):
        loads = np.atleast_2d(np.asarray(self.loads, dtype=float))
        object.__setattr__(self, "loads", loads)
        if loads.shape[0] != self.network.node_count:
            raise ValueError(f"loads have {loads.shape[0]} rows, network has "
                             f"{self.network.node_count} nodes")
        if np.any(loads < 0):
            raise ValueError("loads must be non-negative")
        if self.tech.pv_production_factor.size != loads.shape[1]:
            raise ValueError(f"production factor has {self.tech.pv_production_factor.size} "
                             f"entries, horizon is {loads.shape[1]} hours")
        vmin, vmax = map(float, self.voltage_limits)
        object.__setattr__(self, "voltage_limits", (vmin, vmax))
        if not vmin < vmax:
            raise ValueError("voltage_limits must satisfy V_min < V_max")
        if not 0 < self.power_factor <= 1:
            raise ValueError("power_factor must be in (0, 1]")
        for attr, need in (("big_m_power", self.required_big_m_power),
                           ("big_m_size", self.required_big_m_size)):
            val = getattr(self, attr)
            if val is None:
                object.__setattr__(self, attr, need)
            elif val < need * (1 - 1e-12):
                raise ValueError(f"{attr} must be at least {need:.6g}")

    @property
    def node_count(self) -> int:
        return self.network.node_count

    @property
    def horizon_hours(self) -> int:
        return self.loads.shape[1]

    @property
    def annualization_factor(self) -> float:
        return 8760.0 / self.horizon_hours

    @property
    def peak_total_load(self) -> float:
        return float(self.loads.sum(axis=0).max()) if self.loads.size else 0.0

    @property
    def required_big_m_power(self) -> float:
        return 10.0 * max(self.peak_total_load, 1.0)

    @property
    def required_big_m_size(self) -> float:
        pf = self.tech.pv_production_factor
        day = pf[pf >= DAYLIGHT_THRESHOLD]
        min_pf = float(day.min()) if day.size else max(float(pf.max()), DAYLIGHT_THRESHOLD)
        return 10.0 * max(self.peak_total_load, 1.0) / min_pf

    def with_network(self, network: NetworkModel) -> "DesignScenario":
        return replace(self, network=network, big_m_power=None, big_m_size=None)

    def with_tech(self, **changes) -> "DesignScenario":
        return replace(self, tech=replace(self.tech, **changes))


def tile_profile(profile, hours: int) -> np.ndarray:
    """Repeat a 24-entry daily profile (or pass through an H-entry one) to ``hours``."""
    arr = np.asarray(profile, dtype=float).reshape(-1)
    if arr.size == hours:
        return arr.copy()
    if arr.size == 24 and hours % 24 == 0:
        return np.tile(arr, hours // 24)
    raise ValueError(f"profile has {arr.size} entries; expected 24 or {hours}")
