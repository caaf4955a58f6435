"""Synthetic default inputs for the three-community case study.

None of these series are measured data.  The daily load is a hand-built
evening-peaked shape for a village of about 100 households with two shops and a
school; the PV production factor is a clear-sky bell for an equatorial site with
a fixed day-to-day clearness sequence.
"""

from __future__ import annotations

import math

import numpy as np

from .economics import PVCostCurve
from .netmodel import CableCatalog, default_catalog, star_network
from .scenario import DesignScenario, Economics, TechnologyParams, tile_profile

# kW by hour of day, 00:00-23:00
VILLAGE_LOAD_KW = (
    2.2, 2.0, 1.9, 1.9, 2.0, 2.6,
    3.6, 4.2, 4.6, 5.0, 5.2, 5.4,
    5.6, 5.4, 5.2, 5.0, 5.2, 6.6,
    9.4, 12.0, 12.5, 10.2, 6.4, 3.4,
)

# Daily clearness index for a 30-day window; dry-season site, little variation.
CLEARNESS_30D = (
    0.97, 0.95, 0.92, 0.98, 0.96, 0.88, 0.93, 0.97, 0.99, 0.94,
    0.90, 0.96, 0.98, 0.97, 0.85, 0.91, 0.95, 0.98, 0.96, 0.93,
    0.97, 0.99, 0.94, 0.89, 0.92, 0.96, 0.98, 0.95, 0.97, 0.93,
)

SUNRISE_H = 6.4
SUNSET_H = 18.7
PEAK_FACTOR = 0.82

# Fixed development cost per system plus three marginal-cost tiers; a
# configuration default shaped after published small-PV cost surveys.
DEFAULT_PV_CURVE = PVCostCurve(
    breakpoints=((0.0, 0.0), (30.0, 78000.0), (100.0, 211000.0), (500.0, 811000.0)),
    fixed_cost=20000.0,
)

CASE_STUDY_LEAVES = 2
CASE_STUDY_HOURS = 720


def village_load(hours: int = CASE_STUDY_HOURS) -> np.ndarray:
    return tile_profile(VILLAGE_LOAD_KW, hours)


def daily_pv_shape() -> np.ndarray:
    """Hour-averaged clear-sky production factor for one day (24 values)."""
    out = np.zeros(24)
    span = SUNSET_H - SUNRISE_H
    for h in range(24):
        # average of the half-sine over [h, h+1]
        a, b = max(h, SUNRISE_H), min(h + 1, SUNSET_H)
        if b <= a:
            continue
        ca = math.cos(math.pi * (a - SUNRISE_H) / span)
        cb = math.cos(math.pi * (b - SUNRISE_H) / span)
        out[h] = PEAK_FACTOR * span / math.pi * (ca - cb)
    return out


def production_factor(hours: int = CASE_STUDY_HOURS) -> np.ndarray:
    days = -(-hours // 24)
    clear = np.resize(np.asarray(CLEARNESS_30D), days)
    series = (clear[:, None] * daily_pv_shape()[None, :]).reshape(-1)
    return series[:hours]


def default_tech(hours: int = CASE_STUDY_HOURS, curve: PVCostCurve = DEFAULT_PV_CURVE,
                 **overrides) -> TechnologyParams:
    return TechnologyParams(pv_cost_curve=curve, pv_production_factor=production_factor(hours),
                            **overrides)


def case_study(cable_mm2: float = 95, distance_km: float = 0.1, hours: int = CASE_STUDY_HOURS,
               catalog: CableCatalog | None = None, **kwargs) -> DesignScenario:
    """Three identical communities: the hub (slack) and two spokes."""
    catalog = catalog or default_catalog()
    net = star_network(CASE_STUDY_LEAVES, catalog[cable_mm2], distance_km)
    loads = np.vstack([village_load(hours)] * net.node_count)
    kwargs.setdefault("name", "case-study")
    return DesignScenario(network=net, loads=loads, tech=default_tech(hours), econ=Economics(),
                          **kwargs)
