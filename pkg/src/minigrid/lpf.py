"""Fixed-point linearization of AC power flow.

One step of the power-flow fixed-point map, taken around a known exact
solution (the anchor), makes the complex non-slack voltages affine in the
injections ``x = [p; q]``:

    v(x) = w + G p - j G q,   w = -YLL^-1 YL0 v0,   G = YLL^-1 diag(1 / conj(v_hat))

Voltage magnitudes are projected onto the anchor phase,
``|v_n| ~ Re(conj(v_hat_n) / |v_hat_n| * v_n(x))``, which gives ``|v| = K x + b``.
Slack real power ``Re(v0 conj(Y00 v0 + Y0L v(x)))`` gives ``P0 = F x + d``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .netmodel import AdmittanceMatrix, NumericError
from .xpf import ConvergenceError, injection_residual, no_load_voltage, solve_power_flow, \
    split_injection

log = logging.getLogger(__name__)

ANCHOR_RESIDUAL_TOL = 1e-10
MIN_ANCHOR_VOLTAGE = 0.5


class AnchorError(ValueError):
    """The linearization anchor is not an exact power-flow solution."""


@dataclass(frozen=True, eq=False)
class LinearizationAnchor:
    v_hat: np.ndarray
    x_hat: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v_hat, dtype=complex).reshape(-1)
        x = np.asarray(self.x_hat, dtype=float).reshape(-1)
        if x.shape != (2 * v.size,):
            raise AnchorError(f"x_hat must have length {2 * v.size}, got {x.size}")
        if v.size and np.min(np.abs(v)) < MIN_ANCHOR_VOLTAGE:
            raise AnchorError(f"anchor voltage below {MIN_ANCHOR_VOLTAGE} pu")
        object.__setattr__(self, "v_hat", v)
        object.__setattr__(self, "x_hat", x)

    @property
    def m(self) -> int:
        return self.v_hat.size


def flat_anchor(m: int, v0: complex = 1.0) -> LinearizationAnchor:
    """No-load anchor: every node at the slack voltage, zero injection."""
    return LinearizationAnchor(np.full(m, v0, dtype=complex), np.zeros(2 * m))


def exact_anchor(Y: AdmittanceMatrix, v0: complex, x_hat) -> LinearizationAnchor:
    """Anchor at the exact power-flow solution for injection ``x_hat``."""
    sol = solve_power_flow(Y, v0, x_hat, tol=1e-13, max_iter=500)
    return LinearizationAnchor(sol.v, np.asarray(x_hat, dtype=float))


def anchor_at_mean_load(Y: AdmittanceMatrix, v0: complex, p_mean, q_mean,
                        max_halvings: int = 30) -> LinearizationAnchor:
    """Exact solution at the mean injections.

    When the network cannot carry the mean injections the anchor backs off to
    the largest ``2**-k`` fraction of them that converges, so the model keeps
    its loss terms; the flat anchor is the last resort.
    """
    x_hat = np.concatenate([np.asarray(p_mean, float), np.asarray(q_mean, float)])
    try:
        return exact_anchor(Y, v0, x_hat)
    except (ConvergenceError, AnchorError) as exc:
        first = exc
    for k in range(1, max_halvings + 1):
        try:
            anchor = exact_anchor(Y, v0, x_hat * 0.5 ** k)
        except (ConvergenceError, AnchorError):
            continue
        log.warning("mean-load anchor unavailable (%s); anchoring at %.3g of the mean load",
                    first, 0.5 ** k)
        return anchor
    log.warning("mean-load anchor unavailable (%s); using flat anchor", first)
    return flat_anchor(Y.m, v0)


def reactive_from_real(p, power_factor: float):
    """Reactive injection at a fixed power factor; the sign follows ``p``."""
    if not 0 < power_factor <= 1:
        raise ValueError(f"power factor must be in (0, 1], got {power_factor}")
    return p * math.tan(math.acos(power_factor))


@dataclass(frozen=True, eq=False)
class InjectionProfile:
    p: np.ndarray
    q: np.ndarray
    power_factor: float = 1.0

    @classmethod
    def from_real(cls, p, power_factor: float) -> "InjectionProfile":
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return cls(p, reactive_from_real(p, power_factor), power_factor)

    def column(self, h: int) -> np.ndarray:
        return np.concatenate([self.p[:, h], self.q[:, h]])


@dataclass(frozen=True, eq=False)
class LinearPFModel:
    K: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    d: float
    anchor: LinearizationAnchor = field(repr=False)

    @property
    def m(self) -> int:
        return self.b.size

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != 2 * self.m:
            raise ValueError(f"injection must have length {2 * self.m}, got {x.shape[0]}")
        return x

    def voltage(self, x) -> np.ndarray:
        return self.K @ self._check(x) + self.b

    def slack_power(self, x) -> float:
        return float(self.F @ self._check(x) + self.d)

    def voltage_coefficients(self, power_factor: float) -> np.ndarray:
        """``K`` folded onto real injection when ``q = p tan(acos(pf))``."""
        t = reactive_from_real(1.0, power_factor)
        return self.K[:, :self.m] + t * self.K[:, self.m:]

    def slack_coefficients(self, power_factor: float) -> np.ndarray:
        t = reactive_from_real(1.0, power_factor)
        return self.F[:self.m] + t * self.F[self.m:]


def eval_voltage(model: LinearPFModel, x) -> np.ndarray:
    return model.voltage(x)


def eval_slack_power(model: LinearPFModel, x) -> float:
    return model.slack_power(x)


def compute_linearization(Y: AdmittanceMatrix, v0: complex,
                          anchor: LinearizationAnchor) -> LinearPFModel:
    m = Y.m
    if anchor.m != m:
        raise AnchorError(f"anchor has {anchor.m} nodes, network has {m}")
    v0 = complex(v0)
    if m == 0:
        return LinearPFModel(np.zeros((0, 0)), np.zeros(0), np.zeros(0), 0.0, anchor)

    residual = injection_residual(Y, v0, anchor.v_hat, split_injection(anchor.x_hat, m))
    scale = max(1.0, float(np.max(np.abs(Y.Y))))
    if residual > ANCHOR_RESIDUAL_TOL * scale:
        raise AnchorError(f"anchor is not a power-flow solution (residual {residual:.3g})")

    try:
        G = np.linalg.solve(Y.YLL, np.diag(1.0 / np.conj(anchor.v_hat)))
    except np.linalg.LinAlgError as exc:
        raise NumericError(str(exc)) from None
    w = no_load_voltage(Y, v0)

    u = np.conj(anchor.v_hat) / np.abs(anchor.v_hat)
    UG = u[:, None] * G
    # d|v|/dp = Re(UG); d|v|/dq = Re(-j UG) = Im(UG)
    K = np.hstack([UG.real, UG.imag])
    b = (u * w).real

    c = (Y.Y0L @ G)[0]
    F = np.concatenate([(v0 * np.conj(c)).real, -(v0 * np.conj(c)).imag])
    d = float((v0 * np.conj(Y.Y00[0, 0] * v0 + Y.Y0L[0] @ w)).real)

    for arr in (K, b, F):
        arr.setflags(write=False)
    return LinearPFModel(K, b, F, d, anchor)
