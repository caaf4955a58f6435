"""Cost curves and lifecycle-cost arithmetic."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PVCostCurve:
    """Concave piecewise-linear PV capital cost.

    ``breakpoints`` are ``(capacity_kw, cumulative_cost_usd)`` pairs starting at
    ``(0, 0)``.  ``fixed_cost`` is charged once per built system on top of the
    cumulative cost.  Sizes past the last breakpoint continue at the final
    marginal rate.
    """

    breakpoints: tuple[tuple[float, float], ...]
    fixed_cost: float = 0.0

    def __post_init__(self):
        pts = tuple((float(c), float(v)) for c, v in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        object.__setattr__(self, "fixed_cost", float(self.fixed_cost))
        if len(pts) < 2:
            raise ValueError("cost curve needs at least two breakpoints")
        if pts[0] != (0.0, 0.0):
            raise ValueError("cost curve must start at (0, 0)")
        caps = np.array([p[0] for p in pts])
        costs = np.array([p[1] for p in pts])
        if np.any(np.diff(caps) <= 0):
            raise ValueError("cost curve breakpoints must be strictly increasing")
        if np.any(np.diff(costs) < 0):
            raise ValueError("cumulative cost must be non-decreasing")
        slopes = np.diff(costs) / np.diff(caps)
        if np.any(np.diff(slopes) > 1e-9 * max(1.0, slopes.max())):
            raise ValueError("marginal cost must be non-increasing (concave curve)")
        if self.fixed_cost < 0:
            raise ValueError("fixed cost must be non-negative")

    @property
    def capacities(self) -> np.ndarray:
        return np.array([p[0] for p in self.breakpoints])

    @property
    def cumulative(self) -> np.ndarray:
        return np.array([p[1] for p in self.breakpoints])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.cumulative) / np.diff(self.capacities)

    def marginal_cost(self, size_kw: float) -> float:
        k = np.searchsorted(self.capacities, size_kw, side="right") - 1
        return float(self.slopes[min(max(k, 0), len(self.slopes) - 1)])

    def scaled(self, factor: float) -> "PVCostCurve":
        return scale_pv_curve(self, factor)


def pv_capital_cost(size_kw: float, curve: PVCostCurve) -> float:
    """Installed cost of a PV system of ``size_kw``, including the fixed cost."""
    if size_kw < 0:
        raise ValueError("PV size must be non-negative")
    if size_kw == 0:
        return 0.0
    caps, cum = curve.capacities, curve.cumulative
    if size_kw > caps[-1]:
        log.info("PV size %.3f kW is past the last cost breakpoint; extrapolating", size_kw)
        variable = cum[-1] + curve.slopes[-1] * (size_kw - caps[-1])
    else:
        variable = float(np.interp(size_kw, caps, cum))
    return curve.fixed_cost + variable


def scale_pv_curve(curve: PVCostCurve, factor: float) -> PVCostCurve:
    if not factor > 0:
        raise ValueError("scale factor must be positive")
    return PVCostCurve(tuple((c, v * factor) for c, v in curve.breakpoints),
                       curve.fixed_cost * factor)


def present_worth_factor(discount_rate: float, years: int) -> float:
    """Uniform-series present worth ``(1 - (1+d)^-Y) / d``; ``Y`` when ``d == 0``."""
    if discount_rate == 0:
        return float(years)
    # expm1/log1p keep precision when the rate is tiny
    return -math.expm1(-years * math.log1p(discount_rate)) / discount_rate


def discount(amount: float, year: float, discount_rate: float) -> float:
    return amount * (1.0 + discount_rate) ** -year


def replacement_years(life_yr: float, analysis_years: int) -> list[float]:
    """Years at which an asset with ``life_yr`` is replaced within the analysis."""
    if life_yr <= 0:
        return []
    out, k = [], 1
    while k * life_yr < analysis_years:
        out.append(k * life_yr)
        k += 1
    return out


def lifecycle_cost(capex: float, om_per_yr: float, replacements=(), discount_rate: float = 0.08,
                   analysis_years: int = 20) -> float:
    if discount_rate < 0:
        raise ValueError("discount rate must be non-negative")
    if analysis_years < 1:
        raise ValueError("analysis period must be at least one year")
    total = capex + om_per_yr * present_worth_factor(discount_rate, analysis_years)
    for year, cost in replacements:
        total += discount(cost, year, discount_rate)
    return total
