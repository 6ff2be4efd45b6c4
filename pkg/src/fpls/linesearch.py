"""Step-size conditions and the bracketing/bisection search that meets them.

Two families of conditions are implemented on the squared-residual merit
P(t) = ||x(t) - T(x(t))||^2 along x(t) = x + t*d:

* sufficient decrease:  P(t) - P(0) <= delta * t * <x - T(x), d>
* curvature:            <x(t) - T(x(t)), d> >= sigma * <x - T(x), d>
* strong curvature:     |<x(t) - T(x(t)), d>| <= -sigma * <x - T(x), d>

plus the potential-function backtracking rule used by the Krasnosel'skii-Mann
baseline with Armijo steps.

The bisection search probes with *strict* inequalities (they drive the
bracketing), while the public predicates use the non-strict forms, so any
accepted step re-verifies under the weaker check bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Vector, axpy, dot
from .mappings import FixedPointMap

WOLFE = "wolfe"
STRONG_WOLFE = "strong_wolfe"
ARMIJO_POTENTIAL = "armijo_potential"
MODES = (WOLFE, STRONG_WOLFE, ARMIJO_POTENTIAL)


@dataclass(frozen=True)
class LineSearchConfig:
    """Parameters of the step-size conditions and search.

    delta/sigma are the sufficient-decrease and curvature constants (the
    defaults 0.3/0.5 are the ones used throughout the benchmark runs);
    armijo_D, armijo_beta, armijo_base parameterize the potential-function
    backtracking rule. max_probes caps the number of trial step sizes; when
    clamp_to_unit is set the bisection starts with upper bracket 1 instead of
    an unbounded one (step sizes then never exceed 1, at the cost of possible
    cap-outs when the curvature condition wants a longer step).
    """

    delta: float = 0.3
    sigma: float = 0.5
    mode: str = WOLFE
    max_probes: int = 60
    armijo_D: float = 0.3
    armijo_beta: float = 0.5
    armijo_base: float = 0.5
    clamp_to_unit: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0,1), got {self.sigma}")
        if self.delta > self.sigma:
            raise ValueError(f"need delta <= sigma, got delta={self.delta} > sigma={self.sigma}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == STRONG_WOLFE and self.sigma > 0.5:
            raise ValueError(f"strong_wolfe requires sigma <= 1/2, got {self.sigma}")
        if self.max_probes < 1:
            raise ValueError(f"max_probes must be >= 1, got {self.max_probes}")
        if self.armijo_D <= 0:
            raise ValueError(f"armijo_D must be > 0, got {self.armijo_D}")
        if self.armijo_beta <= 0:
            raise ValueError(f"armijo_beta must be > 0, got {self.armijo_beta}")
        if not 0.0 < self.armijo_base < 1.0:
            raise ValueError(f"armijo_base must lie in (0,1), got {self.armijo_base}")


@dataclass(frozen=True)
class LineSearchOutcome:
    """Result of one search: the step, its cost, and whether conditions hold.

    probes counts trial step sizes evaluated (one map evaluation each); for a
    fallback search it accumulates both legs. satisfied=True guarantees the
    configured predicates re-verify at alpha in non-strict form.
    """

    alpha: float
    probes: int
    satisfied: bool
    used_fallback: bool = False


def _probe(fp_map: FixedPointMap, x: Vector, d: Vector, t: float) -> tuple[float, float]:
    """Return (P(t), <Q(t), d>) with one map evaluation."""
    xt = axpy(t, d, x)
    qt = xt - fp_map(xt)
    return float(np.dot(qt, qt)), float(np.dot(qt, d))


def wolfe_armijo_predicate(fp_map: FixedPointMap, x: Vector, d: Vector, alpha: float, delta: float) -> bool:
    """Non-strict sufficient-decrease condition at step alpha."""
    r0 = x - fp_map(x)
    pt, _ = _probe(fp_map, x, d, alpha)
    return pt - float(np.dot(r0, r0)) <= delta * alpha * dot(r0, d)


def wolfe_curvature_predicate(fp_map: FixedPointMap, x: Vector, d: Vector, alpha: float, sigma: float) -> bool:
    """Non-strict curvature condition at step alpha."""
    r0 = x - fp_map(x)
    _, qd = _probe(fp_map, x, d, alpha)
    return qd >= sigma * dot(r0, d)


def strong_wolfe_predicate(fp_map: FixedPointMap, x: Vector, d: Vector, alpha: float, sigma: float) -> bool:
    """Non-strict strong curvature condition |<Q(alpha), d>| <= -sigma*<Q(0), d>."""
    r0 = x - fp_map(x)
    _, qd = _probe(fp_map, x, d, alpha)
    return abs(qd) <= -sigma * dot(r0, d)


def armijo_potential(fp_map: FixedPointMap, x: Vector, alpha: float, beta: float) -> float:
    """Potential g(alpha) for the KM-with-Armijo baseline.

    g(alpha) = ||x(alpha) - T(x(alpha))||^2 - beta*alpha*(1-alpha)*||T(x) - x||^2
    along the implicit direction d = T(x) - x.
    """
    tx = fp_map(x)
    d = tx - x
    pt, _ = _probe(fp_map, x, d, alpha)
    return pt - beta * alpha * (1.0 - alpha) * float(np.dot(d, d))


def armijo_backtrack(fp_map: FixedPointMap, x: Vector, config: LineSearchConfig) -> LineSearchOutcome:
    """Smallest l >= 0 with g(base^l) - g(0) <= -D * base^l * ||T(x) - x||^2.

    Trials run l = 0, 1, ... up to max_probes; failure returns the last trial
    with satisfied=False.
    """
    tx = fp_map(x)
    d = tx - x
    p0 = float(np.dot(d, d))
    if p0 == 0.0:
        return LineSearchOutcome(alpha=1.0, probes=1, satisfied=True)
    alpha = 1.0
    for level in range(config.max_probes):
        alpha = config.armijo_base**level
        pt, _ = _probe(fp_map, x, d, alpha)
        g_alpha = pt - config.armijo_beta * alpha * (1.0 - alpha) * p0
        if g_alpha - p0 <= -config.armijo_D * alpha * p0:
            return LineSearchOutcome(alpha=alpha, probes=level + 1, satisfied=True)
    return LineSearchOutcome(alpha=alpha, probes=config.max_probes, satisfied=False)


def bisection_wolfe_search(
    fp_map: FixedPointMap,
    x: Vector,
    d: Vector,
    config: LineSearchConfig,
    *,
    tx: Vector | None = None,
) -> LineSearchOutcome:
    """Bracketing/bisection search for a step meeting the configured conditions.

    Maintains a bracket [lo, hi] starting from [0, inf) and a trial t = 1:
    failed sufficient decrease shrinks hi, failed curvature grows lo, and the
    next trial is the bracket midpoint (or 2*lo while hi is unbounded, so t
    may exceed 1). Probing uses strict inequalities. Exceeding max_probes
    returns the last trial with satisfied=False; callers apply the fallback
    policy. tx optionally supplies a precomputed T(x).

    A zero residual at x short-circuits to alpha=1 (every condition is then an
    equality); callers are expected to have checked the stopping rule first.
    """
    if config.mode not in (WOLFE, STRONG_WOLFE):
        raise ValueError(f"bisection search requires wolfe or strong_wolfe mode, got {config.mode!r}")
    if tx is None:
        tx = fp_map(x)
    r0 = x - tx
    p0 = float(np.dot(r0, r0))
    if p0 == 0.0:
        return LineSearchOutcome(alpha=1.0, probes=1, satisfied=True)
    rd0 = float(np.dot(r0, d))

    lo = 0.0
    hi = 1.0 if config.clamp_to_unit else math.inf
    t = 1.0
    for k in range(config.max_probes):
        pt, qd = _probe(fp_map, x, d, t)
        if not pt - p0 < config.delta * t * rd0:
            hi = t
        elif not qd > config.sigma * rd0:
            lo = t
        elif config.mode == STRONG_WOLFE and not qd < -config.sigma * rd0:
            hi = t
        else:
            return LineSearchOutcome(alpha=t, probes=k + 1, satisfied=True)
        t = 0.5 * (lo + hi) if hi < math.inf else 2.0 * lo
    return LineSearchOutcome(alpha=t, probes=config.max_probes, satisfied=False)


def search_with_fallback(
    fp_map: FixedPointMap,
    x: Vector,
    d: Vector,
    config: LineSearchConfig,
    *,
    tx: Vector | None = None,
) -> tuple[LineSearchOutcome, Vector]:
    """Search along d; on failure retry along the steepest-descent direction.

    Returns the outcome together with the direction actually searched. A
    fallback retry reports used_fallback=True and accumulates the probes of
    both legs; for satisfiability accounting the iteration counts as
    unsatisfied whenever the primary attempt failed, regardless of the
    fallback's success.
    """
    if tx is None:
        tx = fp_map(x)
    primary = bisection_wolfe_search(fp_map, x, d, config, tx=tx)
    if primary.satisfied:
        return primary, d
    d_fb = tx - x
    if np.array_equal(d, d_fb):
        # d was already the steepest-descent direction; retrying it would
        # probe the same points.
        return replace(primary, used_fallback=True), d
    fb = bisection_wolfe_search(fp_map, x, d_fb, config, tx=tx)
    fb = replace(fb, probes=primary.probes + fb.probes, used_fallback=True)
    return fb, d_fb
