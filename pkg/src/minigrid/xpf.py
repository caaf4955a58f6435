"""Exact (nonlinear) power flow by fixed-point (Z-bus) iteration.

Serves as the oracle for the linear model: it generates linearization anchors
and measures the voltage error of linear predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .netmodel import AdmittanceMatrix


class ConvergenceError(RuntimeError):
    """The fixed-point iteration did not converge.

    ``last_iterate`` and ``residual`` describe where it stopped; ``timestep`` is
    filled in by callers that iterate over a profile.
    """

    def __init__(self, message, last_iterate=None, residual=np.inf, timestep=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.timestep = timestep


@dataclass(frozen=True, eq=False)
class ExactPFSolution:
    v: np.ndarray = field(repr=False)
    slack_power: complex
    iterations: int
    residual: float


def split_injection(injection, m: int) -> np.ndarray:
    """Complex power ``p + jq`` from a stacked real vector ``[p; q]``."""
    x = np.asarray(injection, dtype=float)
    if x.shape != (2 * m,):
        raise ValueError(f"injection must have length {2 * m}, got shape {x.shape}")
    return x[:m] + 1j * x[m:]


def injection_residual(Y: AdmittanceMatrix, v0: complex, v, s) -> float:
    """Largest complex power mismatch ``|v_n conj((Y [v0; v])_n) - s_n|``."""
    v = np.asarray(v, dtype=complex)
    if v.size == 0:
        return 0.0
    full = np.concatenate(([v0], v))
    s_calc = v * np.conj((Y.Y @ full)[1:])
    return float(np.max(np.abs(s_calc - np.asarray(s))))


def slack_power(Y: AdmittanceMatrix, v0: complex, v) -> complex:
    """Complex power injected by the slack node into the network."""
    i0 = Y.Y00[0, 0] * v0 + (Y.Y0L @ np.asarray(v, dtype=complex)).sum()
    return complex(v0 * np.conj(i0))


def no_load_voltage(Y: AdmittanceMatrix, v0: complex) -> np.ndarray:
    """``-YLL^-1 YL0 v0``, the non-slack voltages with zero injection."""
    if Y.m == 0:
        return np.zeros(0, dtype=complex)
    return -np.linalg.solve(Y.YLL, Y.YL0[:, 0] * v0)


def solve_power_flow(Y: AdmittanceMatrix, v0: complex, injection, tol: float = 1e-10,
                     max_iter: int = 200) -> ExactPFSolution:
    """Iterate ``v <- w + YLL^-1 diag(1/conj(v)) conj(s)`` from a flat start."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    m = Y.m
    s = split_injection(injection, m)
    w = no_load_voltage(Y, v0)
    if m == 0:
        return ExactPFSolution(w, slack_power(Y, v0, w), 0, 0.0)

    lu = lu_factor(Y.YLL)
    v = np.full(m, v0, dtype=complex)
    for it in range(1, max_iter + 1):
        with np.errstate(all="ignore"):
            v_new = w + lu_solve(lu, np.conj(s) / np.conj(v), check_finite=False)
        if not np.all(np.isfinite(v_new)):
            raise ConvergenceError("power flow iterate became non-finite", v,
                                   injection_residual(Y, v0, v, s))
        step = np.max(np.abs(v_new - v))
        v = v_new
        if step < tol:
            return ExactPFSolution(v, slack_power(Y, v0, v), it,
                                   injection_residual(Y, v0, v, s))
    residual = injection_residual(Y, v0, v, s)
    raise ConvergenceError(
        f"power flow did not converge in {max_iter} iterations (residual {residual:.3g})",
        v, residual)


@dataclass(frozen=True)
class ErrorStats:
    mean_pct: float
    max_pct: float
    per_node_mean_pct: tuple[float, ...]


def compare_models(model, Y: AdmittanceMatrix, v0: complex, profiles,
                   tol: float = 1e-10, max_iter: int = 200) -> ErrorStats:
    """Percentage voltage-magnitude error of ``model`` against the exact solution.

    ``model`` is a :class:`~minigrid.lpf.LinearPFModel`; ``profiles`` an
    :class:`~minigrid.lpf.InjectionProfile` with one column per timestep.
    """
    p = np.atleast_2d(np.asarray(profiles.p, dtype=float))
    q = np.atleast_2d(np.asarray(profiles.q, dtype=float))
    if p.size == 0 or p.shape[1] == 0:
        raise ValueError("profiles must contain at least one timestep")
    m, H = p.shape
    errs = np.empty((m, H))
    for h in range(H):
        x = np.concatenate([p[:, h], q[:, h]])
        try:
            exact = solve_power_flow(Y, v0, x, tol, max_iter)
        except ConvergenceError as exc:
            exc.timestep = h
            raise
        mag = np.abs(exact.v)
        errs[:, h] = 100.0 * np.abs(model.voltage(x) - mag) / mag
    return ErrorStats(float(errs.mean()), float(errs.max()), tuple(errs.mean(axis=1)))
