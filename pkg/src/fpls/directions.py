"""Conjugate-gradient-type direction updates for fixed-point residuals.

The next search direction is d_next = -r_next + beta * d_prev, where r is the
residual x - T(x) and beta comes from one of six formulas: the steepest-descent
zero, the classical FR / DY quotients, the nonnegative HS+ / PRP+ clamps, and
the Hager-Zhang correction (no clamp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Vector, check_same_dim

SD = "sd"
HS_PLUS = "hs+"
FR = "fr"
PRP_PLUS = "prp+"
DY = "dy"
HZ = "hz"
BETA_KINDS = (SD, HS_PLUS, FR, PRP_PLUS, DY, HZ)


class DegenerateDenominator(ArithmeticError):
    """A beta formula's denominator vanished; the caller restarts with beta=0."""


@dataclass(frozen=True)
class DirectionState:
    """Residuals before/after a step and the direction that produced it."""

    r_prev: Vector
    r_next: Vector
    d_prev: Vector

    def __post_init__(self):
        check_same_dim(self.r_prev, self.r_next)
        check_same_dim(self.r_prev, self.d_prev)


def beta(kind: str, state: DirectionState, eps_denom: float = 1e-300) -> float:
    """Evaluate the beta formula for the given variant.

    Raises DegenerateDenominator when the variant's denominator has magnitude
    <= eps_denom (effectively exact-zero detection by default); the documented
    restart policy is then beta = 0, i.e. a steepest-descent step.
    """
    if kind not in BETA_KINDS:
        raise ValueError(f"unknown beta kind {kind!r}")
    if kind == SD:
        return 0.0

    r_next, r_prev, d = state.r_next, state.r_prev, state.d_prev
    y = r_next - r_prev

    if kind == FR:
        denom = float(np.dot(r_prev, r_prev))
        _require(denom, eps_denom, kind)
        return float(np.dot(r_next, r_next)) / denom
    if kind == PRP_PLUS:
        denom = float(np.dot(r_prev, r_prev))
        _require(denom, eps_denom, kind)
        return max(float(np.dot(r_next, y)) / denom, 0.0)
    if kind == HS_PLUS:
        denom = float(np.dot(d, y))
        _require(denom, eps_denom, kind)
        return max(float(np.dot(r_next, y)) / denom, 0.0)
    if kind == DY:
        denom = float(np.dot(d, y))
        _require(denom, eps_denom, kind)
        return float(np.dot(r_next, r_next)) / denom
    # HZ: the HS quotient minus the curvature correction, no lower clamp.
    denom = float(np.dot(d, y))
    _require(denom, eps_denom, kind)
    beta_hs = float(np.dot(r_next, y)) / denom
    correction = 2.0 * float(np.dot(y, y)) / denom * (float(np.dot(r_next, d)) / denom)
    return beta_hs - correction


def _require(denom: float, eps_denom: float, kind: str) -> None:
    if abs(denom) <= eps_denom or not math.isfinite(denom):
        raise DegenerateDenominator(f"beta[{kind}] denominator {denom!r}")


def next_direction(state: DirectionState, beta_value: float) -> Vector:
    """d_next = -r_next + beta * d_prev."""
    if not math.isfinite(beta_value):
        raise ValueError(f"beta_value must be finite, got {beta_value}")
    return -state.r_next + beta_value * state.d_prev


def descent_check(r: Vector, d: Vector, c: float) -> bool:
    """Diagnostic: <r, d> <= -c * ||r||^2.

    The convergence results for the clamped variants assume some c > 0 makes
    this hold along the whole trajectory; the solver logs violations instead
    of enforcing them.
    """
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    check_same_dim(r, d)
    return float(np.dot(r, d)) <= -c * float(np.dot(r, r))
