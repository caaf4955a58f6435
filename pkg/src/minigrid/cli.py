"""Command-line entry point: ``minigrid <command> --scenario file.json [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import designmilp as dm
from . import outputs
from .config import ConfigError, parse_scenario
from .economics import scale_pv_curve
from .lpf import InjectionProfile
from .solvers import SolverUnavailableError, get_solver
from .sweep import SweepSpec, classify_regions, run_sweep, single_node_check
from .xpf import ConvergenceError, compare_models

log = logging.getLogger("minigrid")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_SOLVER_MISSING = 5
EXIT_INFEASIBLE = 6
EXIT_SOLVE_FAILED = 7
EXIT_CONVERGENCE = 8
EXIT_CHECK_FAILED = 9


class CheckFailed(Exception):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON file")
    common.add_argument("--out", default="minigrid-out", help="output directory")
    common.add_argument("--solver", default="highs",
                        help="'highs' (in-process), 'highs-cli', or a solver executable path")
    common.add_argument("--mip-gap", type=float, default=1e-4)
    common.add_argument("--time-limit", type=_positive, default=None, help="seconds per solve")
    common.add_argument("--pv-cost-scale", type=_positive, default=1.0)
    common.add_argument("--no-voltage-constraints", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="minigrid", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="optimal design for one scenario")
    s.add_argument("--topology", choices=("free", "connected", "decentralized"), default="free")
    s.add_argument("--strategy", choices=("auto", "milp", "enumerate"), default="auto")

    s = sub.add_parser("sweep", parents=[common], help="NPV grid over distance and cable size")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--distances", type=_float_list, default=None, help="km, comma-separated")
    s.add_argument("--cables", type=_float_list, default=None, help="mm2, comma-separated")
    s.add_argument("--with-unconstrained", action="store_true",
                   help="also sweep without voltage limits to locate voltage-excluded cells")
    s.add_argument("--no-figures", action="store_true", help="skip the PNG heatmaps")
    s.add_argument("--strategy", choices=("auto", "milp", "enumerate"), default="auto")

    s = sub.add_parser("pf-validate", parents=[common],
                       help="linear vs exact power flow on the scenario's injections")
    s.add_argument("--anchor", choices=("flat", "mean"), default="flat")
    s.add_argument("--injections", default=None,
                   help="solution.csv whose injection_kw column replaces the load profile")

    sub.add_parser("single-node-check", parents=[common],
                   help="all-connected network vs one aggregate node")

    s = sub.add_parser("dump-lpf", parents=[common], help="write the linear model coefficients")
    s.add_argument("--anchor", choices=("flat", "mean"), default="mean")
    return p


def _scenario(args):
    sc = parse_scenario(args.scenario)
    if args.pv_cost_scale != 1.0:
        sc = sc.with_tech(pv_cost_curve=scale_pv_curve(sc.tech.pv_cost_curve, args.pv_cost_scale))
    return sc


def cmd_solve(args) -> dict:
    sc = _scenario(args)
    _, model = dm.linearize(sc)
    solver = get_solver(args.solver, args.mip_gap, args.time_limit)
    volt = not args.no_voltage_constraints
    if args.topology == "free":
        sol = dm.solve_design(sc, model, solver=solver, mip_gap=args.mip_gap,
                              time_limit=args.time_limit, voltage_constraints=volt,
                              strategy=args.strategy)
    else:
        force = args.topology == "connected"
        inst = dm.build_design_model(sc, model, voltage_constraints=volt,
                                     force_connect=force if sc.network.m else None)
        sol = dm.solve(inst, solver, args.mip_gap, args.time_limit)
    outputs.write_solution(sol, args.out)
    return outputs.solution_summary(sol)


def cmd_sweep(args) -> dict:
    sc = parse_scenario(args.scenario)
    kw = {}
    if args.distances:
        kw["distances_km"] = args.distances
    if args.cables:
        kw["cable_sizes"] = args.cables
    spec = SweepSpec(pv_cost_scale=args.pv_cost_scale,
                     voltage_constraints_enabled=not args.no_voltage_constraints, **kw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(cell):
        log.info("%.3g km, %g mm2: %s (npv %.0f)", cell.distance_km, cell.cable_mm2, cell.label,
                 cell.npv)

    common = dict(workers=args.workers, solver=args.solver, mip_gap=args.mip_gap,
                  time_limit=args.time_limit, strategy=args.strategy, progress=progress)
    grid = run_sweep(sc, spec, checkpoint=out / "cells.jsonl", **common)
    free = None
    if args.with_unconstrained and spec.voltage_constraints_enabled:
        uspec = SweepSpec(spec.distances_km, spec.cable_sizes, spec.pv_cost_scale, False)
        free = run_sweep(sc, uspec, checkpoint=out / "unconstrained_cells.jsonl", **common)
    report = classify_regions(grid, free)
    files = outputs.write_grid(grid, report, out)
    if free is not None:
        files += outputs.write_grid(free, classify_regions(free), out, prefix="unconstrained_")
    if not args.no_figures:
        from .plotting import plot_npv_grid
        files.append(plot_npv_grid(grid, out / "npv_heatmap.png"))
        if free is not None:
            files.append(plot_npv_grid(free, out / "unconstrained_npv_heatmap.png"))
    failed = [c for c in grid.cells.values() if c.status not in ("optimal", "time_limit")]
    labels = grid.labels.reshape(-1).tolist()
    return {
        "cells": len(grid.cells),
        "failed_cells": len(failed),
        "centralized": labels.count("centralized"),
        "decentralized": labels.count("decentralized"),
        "infeasible_connection": labels.count("infeasible_connection"),
        "lower_boundary": len(report.lower_boundary),
        "upper_boundary": len(report.upper_boundary),
        "has_two_boundaries": report.has_two_boundaries,
        "files": [str(f) for f in files],
    }


def cmd_pf_validate(args) -> dict:
    sc = _scenario(args)
    Y, model = dm.linearize(sc, anchor=args.anchor)
    if sc.network.m == 0:
        raise ConfigError("pf-validate needs at least one non-slack node")
    if args.injections:
        p_kw = outputs.read_solution_injections(args.injections)[1:]
        if p_kw.shape[0] != sc.network.m:
            raise ConfigError(f"{args.injections}: {p_kw.shape[0] + 1} nodes, scenario has "
                              f"{sc.node_count}")
    else:
        p_kw = -sc.loads[1:]
    prof = InjectionProfile.from_real(p_kw / sc.network.s_base, sc.power_factor)
    stats = compare_models(model, Y, sc.network.slack_voltage, prof)
    result = {"mean_error_pct": stats.mean_pct, "max_error_pct": stats.max_pct,
              "per_node_mean_error_pct": list(stats.per_node_mean_pct),
              "anchor": args.anchor, "timesteps": int(p_kw.shape[1])}
    outputs.atomic_write(Path(args.out) / "pf_validation.json", json.dumps(result, indent=2) + "\n")
    return result


def cmd_single_node_check(args) -> dict:
    sc = _scenario(args)
    cmp = single_node_check(sc, solver=args.solver, mip_gap=args.mip_gap,
                            time_limit=args.time_limit)
    result = {"result": "PASS" if cmp.passed else "FAIL",
              "lcc_multi_usd": cmp.lcc_multi, "lcc_single_usd": cmp.lcc_single,
              "lcc_rel_delta": cmp.lcc_rel_delta, "pv_multi_kw": cmp.pv_multi,
              "pv_single_kw": cmp.pv_single, "pv_rel_delta": cmp.pv_rel_delta,
              "batt_multi_kwh": cmp.batt_multi, "batt_single_kwh": cmp.batt_single,
              "batt_rel_delta": cmp.batt_rel_delta, "tolerance": 2 * cmp.mip_gap}
    outputs.atomic_write(Path(args.out) / "single_node_check.json",
                         json.dumps(result, indent=2) + "\n")
    print(f"{result['result']} relative cost delta {cmp.lcc_rel_delta:.3e} "
          f"(tolerance {2 * cmp.mip_gap:.1e})")
    if not cmp.passed:
        raise CheckFailed(f"single-node equivalence failed: cost delta {cmp.lcc_rel_delta:.3e}, "
                          f"PV delta {cmp.pv_rel_delta:.3e}, battery delta "
                          f"{cmp.batt_rel_delta:.3e}")
    return result


def cmd_dump_lpf(args) -> dict:
    sc = _scenario(args)
    _, model = dm.linearize(sc, anchor=args.anchor)
    path = outputs.write_lpf(model, Path(args.out) / "lpf.csv")
    return {"file": str(path), "nodes": model.m, "anchor": args.anchor}


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "pf-validate": cmd_pf_validate,
            "single-node-check": cmd_single_node_check, "dump-lpf": cmd_dump_lpf}


def _fail(code: int, kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message, "exit_code": code, **extra}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario_path = Path(args.scenario)
        if not scenario_path.is_file():
            return _fail(EXIT_IO, "io", f"scenario file {str(scenario_path)!r} is not readable")
        result = COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except SolverUnavailableError as exc:
        return _fail(EXIT_SOLVER_MISSING, "solver_unavailable", str(exc))
    except dm.InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", str(exc), family=exc.family)
    except dm.SolveFailedError as exc:
        return _fail(EXIT_SOLVE_FAILED, "solve_failed", str(exc), status=exc.status)
    except ConvergenceError as exc:
        return _fail(EXIT_CONVERGENCE, "power_flow_divergence", str(exc), timestep=exc.timestep)
    except CheckFailed as exc:
        return _fail(EXIT_CHECK_FAILED, "check_failed", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except Exception as exc:  # pragma: no cover - last-resort reporting
        log.debug("unexpected failure", exc_info=True)
        return _fail(EXIT_UNEXPECTED, "unexpected", f"{type(exc).__name__}: {exc}")
    if args.command != "single-node-check":
        print(json.dumps(result, indent=2, default=_json_default))
    return EXIT_OK


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


if __name__ == "__main__":
    sys.exit(main())
