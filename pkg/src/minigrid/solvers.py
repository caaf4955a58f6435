"""MILP solver adapters.

Every adapter follows the same cycle: ``load(instance)``, ``set_limits(...)``,
``solve()``, then ``value(name)`` / ``result.x`` to read variables back.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .milp import MILPInstance, write_lp

SOLVER_PATH_ENV = "MINIGRID_SOLVER_PATH"

OPTIMAL = "optimal"
TIME_LIMIT = "time_limit"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ERROR = "error"


class SolverUnavailableError(RuntimeError):
    pass


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    mip_gap: float | None
    runtime_s: float
    message: str = ""

    @property
    def has_solution(self) -> bool:
        return self.x is not None


class SolverAdapter:
    name = "base"

    def __init__(self, mip_gap: float = 1e-4, time_limit: float | None = None):
        self.mip_gap = mip_gap
        self.time_limit = time_limit
        self.instance: MILPInstance | None = None
        self.result: SolveResult | None = None

    def load(self, instance: MILPInstance) -> None:
        self.instance = instance
        self.result = None

    def set_limits(self, mip_gap: float | None = None, time_limit: float | None = None) -> None:
        if mip_gap is not None:
            self.mip_gap = mip_gap
        if time_limit is not None:
            self.time_limit = time_limit

    def solve(self) -> SolveResult:
        if self.instance is None:
            raise RuntimeError("no instance loaded")
        self.result = self._solve(self.instance)
        return self.result

    def _solve(self, instance: MILPInstance) -> SolveResult:
        raise NotImplementedError

    def value(self, name: str) -> float:
        if self.result is None or self.result.x is None:
            raise RuntimeError("no solution available")
        return float(self.result.x[self.instance.var_names.index(name)])

    def values(self, block: str) -> np.ndarray:
        return self.instance.values(self.result.x, block)


class HighsAdapter(SolverAdapter):
    """In-process HiGHS through :func:`scipy.optimize.milp`."""

    name = "highs"

    def _solve(self, inst: MILPInstance) -> SolveResult:
        options = {"mip_rel_gap": self.mip_gap, "disp": False, "presolve": True}
        if self.time_limit is not None:
            options["time_limit"] = float(self.time_limit)
        constraints = ()
        if inst.num_rows:
            constraints = LinearConstraint(inst.A, inst.row_lo, inst.row_hi)
        t0 = time.perf_counter()
        res = milp(inst.obj, integrality=inst.integer.astype(int), bounds=Bounds(inst.lb, inst.ub),
                   constraints=constraints, options=options)
        elapsed = time.perf_counter() - t0
        status = {0: OPTIMAL, 1: TIME_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ERROR)
        x = res.x if res.x is not None else None
        obj = float(res.fun) + inst.obj_const if x is not None else None
        gap = getattr(res, "mip_gap", None)
        return SolveResult(status, x, obj, None if gap is None else float(gap), elapsed,
                           str(res.message))


class LPFileAdapter(SolverAdapter):
    """External HiGHS executable driven through LP and solution files."""

    name = "highs-cli"

    def __init__(self, executable: str | os.PathLike | None = None, **kwargs):
        super().__init__(**kwargs)
        exe = executable or os.environ.get(SOLVER_PATH_ENV) or shutil.which("highs")
        if not exe or not Path(exe).exists():
            raise SolverUnavailableError(
                f"HiGHS executable not found (set {SOLVER_PATH_ENV} or pass --solver <path>)")
        self.executable = str(exe)

    def _solve(self, inst: MILPInstance) -> SolveResult:
        with tempfile.TemporaryDirectory(prefix="minigrid-") as tmp:
            lp = Path(tmp, "model.lp")
            sol = Path(tmp, "model.sol")
            opts = Path(tmp, "highs.opt")
            write_lp(inst, lp)
            lines = [f"mip_rel_gap = {self.mip_gap!r}"]
            if self.time_limit is not None:
                lines.append(f"time_limit = {float(self.time_limit)!r}")
            opts.write_text("\n".join(lines) + "\n")
            cmd = [self.executable, "--model_file", str(lp), "--solution_file", str(sol),
                   "--options_file", str(opts)]
            t0 = time.perf_counter()
            proc = subprocess.run(cmd, capture_output=True, text=True)
            elapsed = time.perf_counter() - t0
            if not sol.exists():
                return SolveResult(ERROR, None, None, None, elapsed,
                                   proc.stderr.strip() or proc.stdout.strip())
            status, values, objective = read_highs_solution(sol)
        x = None
        if values:
            x = np.zeros(inst.num_vars)
            pos = {n: i for i, n in enumerate(inst.var_names)}
            for n, v in values.items():
                if n in pos:
                    x[pos[n]] = v
            objective = float(inst.obj @ x) + inst.obj_const
        return SolveResult(status, x, objective if x is not None else None, None, elapsed,
                           proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else "")


_HIGHS_STATUS = {
    "optimal": OPTIMAL,
    "infeasible": INFEASIBLE,
    "unbounded": UNBOUNDED,
    "primal infeasible or unbounded": INFEASIBLE,
    "time limit reached": TIME_LIMIT,
}


def read_highs_solution(path) -> tuple[str, dict[str, float], float | None]:
    """Parse a HiGHS raw solution file into (status, column values, objective)."""
    lines = Path(path).read_text().splitlines()
    status, values, objective = ERROR, {}, None
    k = 0
    while k < len(lines):
        line = lines[k].strip()
        if line == "Model status" and k + 1 < len(lines):
            status = _HIGHS_STATUS.get(lines[k + 1].strip().lower(), ERROR)
            k += 1
        elif line.startswith("Objective"):
            objective = float(line.split()[1])
        elif line.startswith("# Columns") and not values:
            count = int(line.split()[2])
            for entry in lines[k + 1:k + 1 + count]:
                name, val = entry.split()[:2]
                values[name] = float(val)
            k += count
        k += 1
    return status, values, objective


def get_solver(spec: str = "highs", mip_gap: float = 1e-4,
               time_limit: float | None = None) -> SolverAdapter:
    """Resolve ``--solver`` values: ``highs`` (in-process), ``highs-cli`` or a path."""
    if spec in ("highs", "scipy", "auto"):
        return HighsAdapter(mip_gap=mip_gap, time_limit=time_limit)
    if spec == "highs-cli":
        return LPFileAdapter(mip_gap=mip_gap, time_limit=time_limit)
    if Path(spec).exists():
        return LPFileAdapter(spec, mip_gap=mip_gap, time_limit=time_limit)
    raise SolverUnavailableError(f"unknown solver {spec!r}")
