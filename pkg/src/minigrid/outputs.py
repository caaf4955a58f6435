"""Result files.  Every writer goes through :func:`atomic_write` (temp file, then rename)."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .designmilp import DesignSolution
from .lpf import LinearPFModel
from .sweep import BoundaryReport, NPVGrid

SOLUTION_HEADER = ("node", "hour", "pv_kw", "charge_kw", "discharge_kw", "soc_kwh",
                   "injection_kw", "voltage_pu")
GRID_HEADER = ("distance_km", "cable_mm2", "npv_usd", "label", "lcc_opt", "lcc_ref", "status")


def atomic_write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    """Full-precision, locale-independent number text."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def solution_rows(sol: DesignSolution):
    N, H = sol.injection.shape
    for n in range(N):
        for h in range(H):
            yield (n, h, _num(sol.pv_dispatch[n, h]), _num(sol.charge[n, h]),
                   _num(sol.discharge[n, h]), _num(sol.soc[n, h]), _num(sol.injection[n, h]),
                   _num(sol.voltage[n, h]))


def solution_summary(sol: DesignSolution) -> dict:
    return {
        "scenario": sol.scenario.name if sol.scenario is not None else None,
        "status": sol.status,
        "mip_gap": sol.mip_gap,
        "objective_lcc_usd": sol.objective_lcc,
        "voltage_constraints": sol.voltage_constraints,
        "centralized": sol.is_centralized,
        "nodes": [{"node": n, "connected": bool(sol.connected[n]), "pv_kw": float(sol.pv_kw[n]),
                   "batt_kwh": float(sol.batt_kwh[n])} for n in range(len(sol.connected))],
        "costs_usd": {k: float(v) for k, v in sol.costs.items()},
        "min_voltage_pu": float(sol.voltage.min()),
        "max_voltage_pu": float(sol.voltage.max()),
        "runtime_s": sol.runtime_s,
    }


def write_solution(sol: DesignSolution, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    return [atomic_write(out / "solution.csv", _csv_text(SOLUTION_HEADER, solution_rows(sol))),
            atomic_write(out / "summary.json", json.dumps(solution_summary(sol), indent=2) + "\n")]


def read_solution_injections(path: str | Path) -> np.ndarray:
    """``(nodes, hours)`` kW injections from a ``solution.csv``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    N = 1 + max(int(r["node"]) for r in rows)
    H = 1 + max(int(r["hour"]) for r in rows)
    out = np.full((N, H), np.nan)
    for r in rows:
        out[int(r["node"]), int(r["hour"])] = float(r["injection_kw"])
    if np.isnan(out).any():
        raise ValueError(f"{path}: missing (node, hour) rows")
    return out


def grid_rows(grid: NPVGrid):
    for d in grid.spec.distances_km:
        for c in grid.spec.cable_sizes:
            cell = grid.cell(d, c)
            yield (_num(d), _num(c), _num(cell.npv), cell.label, _num(cell.lcc_opt),
                   _num(cell.lcc_ref), cell.status)


def gnuplot_matrix(grid: NPVGrid) -> str:
    """Nonuniform-matrix layout: first row cable sizes, first column distances."""
    lines = ["# rows: distance_km, columns: cable_mm2, values: npv_usd"]
    lines.append(" ".join(["0"] + [_num(c) for c in grid.spec.cable_sizes]))
    npv = grid.npv
    for i, d in enumerate(grid.spec.distances_km):
        lines.append(" ".join([_num(d)] + [_num(v) for v in npv[i]]))
    return "\n".join(lines) + "\n"


def boundary_rows(report: BoundaryReport):
    for kind, cells in (("lower", report.lower_boundary), ("upper", report.upper_boundary),
                        ("voltage_excluded", report.voltage_excluded)):
        for d, c in cells:
            yield kind, _num(d), _num(c)


def write_grid(grid: NPVGrid, report: BoundaryReport, out_dir: str | Path,
               prefix: str = "") -> list[Path]:
    out = Path(out_dir)
    return [
        atomic_write(out / f"{prefix}npv_grid.csv", _csv_text(GRID_HEADER, grid_rows(grid))),
        atomic_write(out / f"{prefix}boundary_report.csv",
                     _csv_text(("boundary", "distance_km", "cable_mm2"), boundary_rows(report))),
        atomic_write(out / f"{prefix}npv_matrix.dat", gnuplot_matrix(grid)),
    ]


def lpf_rows(model: LinearPFModel):
    M = model.m
    for n in range(M):
        for k in range(2 * M):
            yield "K", n, k, _num(model.K[n, k])
        yield "b", n, 0, _num(model.b[n])
    for k in range(2 * M):
        yield "F", 0, k, _num(model.F[k])
    yield "d", 0, 0, _num(model.d)


def write_lpf(model: LinearPFModel, path: str | Path) -> Path:
    return atomic_write(path, _csv_text(("matrix", "row", "col", "value"), lpf_rows(model)))
