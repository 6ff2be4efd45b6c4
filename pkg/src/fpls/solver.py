"""Outer iteration loops, stopping rules, tracing, and rate-bound evaluation.

run_algorithm1 drives the conjugate-gradient-type fixed-point iteration:
search a step along d_n meeting the configured conditions (falling back to the
steepest-descent direction when the search fails), step, then build d_{n+1}
from the chosen beta formula. run_km_constant and run_km_armijo are the
Krasnosel'skii-Mann baselines it is benchmarked against.

Every run produces one IterationRecord per iterate: executed iterations carry
alpha > 0, and the final row (alpha == 0) marks the terminal state. The
satisfiability statistic of the benchmark harness is derived purely from these
records: an iteration counts as satisfied only when the search succeeded on
the iteration's own direction, not via fallback.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Vector, axpy, norm, vector
from .directions import (
    BETA_KINDS,
    DY,
    FR,
    HS_PLUS,
    HZ,
    PRP_PLUS,
    SD,
    DegenerateDenominator,
    DirectionState,
    beta,
    descent_check,
    next_direction,
)
from .linesearch import (
    STRONG_WOLFE,
    LineSearchConfig,
    armijo_backtrack,
    search_with_fallback,
)
from .mappings import FixedPointMap

RESIDUAL_ZERO = "residual_zero"
ITERATION_CAP = "iteration_cap"
LINESEARCH_FAILURE = "linesearch_failure"


class RateBoundError(AssertionError):
    """A recorded residual exceeded its theoretical per-iteration bound."""


@dataclass(frozen=True)
class SolverConfig:
    beta_kind: str = SD
    linesearch: LineSearchConfig = field(default_factory=LineSearchConfig)
    max_iters: int = 10
    residual_tol: float = 1e-12
    rate_check: bool = False
    diag_c: float = 1e-8

    def __post_init__(self):
        if self.beta_kind not in BETA_KINDS:
            raise ValueError(f"beta_kind must be one of {BETA_KINDS}, got {self.beta_kind!r}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.residual_tol < 0:
            raise ValueError(f"residual_tol must be >= 0, got {self.residual_tol}")
        if self.diag_c <= 0:
            raise ValueError(f"diag_c must be > 0, got {self.diag_c}")


@dataclass(frozen=True)
class IterationRecord:
    """One trace row. alpha == 0 marks a terminal (non-executed) row."""

    n: int
    residual_norm: float
    alpha: float
    beta_value: float
    ls_probes: int
    ls_satisfied: bool
    used_fallback: bool
    descent_ok: bool
    elapsed_ns: int


@dataclass(frozen=True)
class RunResult:
    final_point: Vector
    records: tuple[IterationRecord, ...]
    terminated_by: str


def _terminal_record(n: int, residual_norm: float) -> IterationRecord:
    return IterationRecord(
        n=n,
        residual_norm=residual_norm,
        alpha=0.0,
        beta_value=0.0,
        ls_probes=0,
        ls_satisfied=False,
        used_fallback=False,
        descent_ok=True,
        elapsed_ns=0,
    )


def run_algorithm1(
    fp_map: FixedPointMap,
    x0: Vector,
    config: SolverConfig,
    *,
    force_alpha: float | None = None,
) -> RunResult:
    """Run the line-search fixed-point iteration from x0.

    force_alpha bypasses the search and takes the given constant step each
    iteration, recording whether the step-size conditions happened to hold
    (diagnostic hook; with beta_kind "sd" and force_alpha=0.5 this reproduces
    run_km_constant exactly).
    """
    x = vector(x0)
    if x.shape != (fp_map.dim,):
        raise ValueError(f"x0 has dim {x.shape[0]}, map expects {fp_map.dim}")
    ls = config.linesearch

    tx = fp_map(x)
    r = x - tx
    rn = norm(r)
    d = -r
    records: list[IterationRecord] = []
    n = 0
    terminated_by = ITERATION_CAP

    while True:
        if rn <= config.residual_tol:
            records.append(_terminal_record(n, rn))
            terminated_by = RESIDUAL_ZERO
            break
        if n >= config.max_iters:
            records.append(_terminal_record(n, rn))
            terminated_by = ITERATION_CAP
            break

        started = time.perf_counter_ns()
        d_used = d
        if force_alpha is None:
            outcome, d_used = search_with_fallback(fp_map, x, d, ls, tx=tx)
            if not outcome.satisfied:
                records.append(
                    IterationRecord(
                        n=n,
                        residual_norm=rn,
                        alpha=0.0,
                        beta_value=0.0,
                        ls_probes=outcome.probes,
                        ls_satisfied=False,
                        used_fallback=outcome.used_fallback,
                        descent_ok=descent_check(r, d, config.diag_c),
                        elapsed_ns=time.perf_counter_ns() - started,
                    )
                )
                terminated_by = LINESEARCH_FAILURE
                break
            alpha = outcome.alpha
            probes = outcome.probes
            satisfied = outcome.satisfied and not outcome.used_fallback
            used_fallback = outcome.used_fallback
        else:
            alpha = force_alpha
            probes = 1
            used_fallback = False

        descent_ok = descent_check(r, d_used, config.diag_c)
        x_next = axpy(alpha, d_used, x)
        tx_next = fp_map(x_next)
        r_next = x_next - tx_next
        rn_next = norm(r_next)

        if force_alpha is not None:
            # Evaluate the strict step-size conditions at the forced step; the
            # probe point coincides with x_next, so this costs nothing extra.
            p0 = float(np.dot(r, r))
            rd0 = float(np.dot(r, d_used))
            pt = float(np.dot(r_next, r_next))
            qd = float(np.dot(r_next, d_used))
            satisfied = (pt - p0 < ls.delta * alpha * rd0) and (qd > ls.sigma * rd0)

        if rn_next <= config.residual_tol:
            beta_value = 0.0
            d = d_used  # unused; loop terminates next pass
        else:
            state = DirectionState(r_prev=r, r_next=r_next, d_prev=d_used)
            try:
                beta_value = beta(config.beta_kind, state)
            except DegenerateDenominator:
                beta_value = 0.0
            d = next_direction(state, beta_value)

        records.append(
            IterationRecord(
                n=n,
                residual_norm=rn,
                alpha=alpha,
                beta_value=beta_value,
                ls_probes=probes,
                ls_satisfied=satisfied,
                used_fallback=used_fallback,
                descent_ok=descent_ok,
                elapsed_ns=time.perf_counter_ns() - started,
            )
        )
        x, tx, r, rn = x_next, tx_next, r_next, rn_next
        n += 1

    result = RunResult(final_point=x, records=tuple(records), terminated_by=terminated_by)
    if config.rate_check:
        _assert_rate_bounds(result, config)
    return result


def run_km_constant(
    fp_map: FixedPointMap,
    x0: Vector,
    alpha_const: float,
    max_iters: int,
    residual_tol: float,
    *,
    predicate_config: LineSearchConfig | None = None,
    diag_c: float = 1e-8,
) -> RunResult:
    """Krasnosel'skii-Mann iteration x <- x + alpha*(T(x) - x) with constant alpha.

    Each record notes whether the constant step happened to satisfy the strict
    step-size conditions at delta/sigma from predicate_config (defaults 0.3 /
    0.5), which feeds the satisfiability statistic for this baseline.
    """
    if not 0.0 < alpha_const < 1.0:
        raise ValueError(f"alpha_const must lie in (0,1), got {alpha_const}")
    ls = predicate_config if predicate_config is not None else LineSearchConfig()
    x = vector(x0)
    if x.shape != (fp_map.dim,):
        raise ValueError(f"x0 has dim {x.shape[0]}, map expects {fp_map.dim}")

    tx = fp_map(x)
    r = x - tx
    rn = norm(r)
    records: list[IterationRecord] = []
    n = 0
    terminated_by = ITERATION_CAP

    while True:
        if rn <= residual_tol:
            records.append(_terminal_record(n, rn))
            terminated_by = RESIDUAL_ZERO
            break
        if n >= max_iters:
            records.append(_terminal_record(n, rn))
            terminated_by = ITERATION_CAP
            break

        started = time.perf_counter_ns()
        d = tx - x
        descent_ok = descent_check(r, d, diag_c)
        x_next = axpy(alpha_const, d, x)
        tx_next = fp_map(x_next)
        r_next = x_next - tx_next
        rn_next = norm(r_next)

        p0 = float(np.dot(r, r))
        rd0 = float(np.dot(r, d))
        pt = float(np.dot(r_next, r_next))
        qd = float(np.dot(r_next, d))
        satisfied = (pt - p0 < ls.delta * alpha_const * rd0) and (qd > ls.sigma * rd0)

        records.append(
            IterationRecord(
                n=n,
                residual_norm=rn,
                alpha=alpha_const,
                beta_value=0.0,
                ls_probes=1,
                ls_satisfied=satisfied,
                used_fallback=False,
                descent_ok=descent_ok,
                elapsed_ns=time.perf_counter_ns() - started,
            )
        )
        x, tx, r, rn = x_next, tx_next, r_next, rn_next
        n += 1

    return RunResult(final_point=x, records=tuple(records), terminated_by=terminated_by)


def run_km_armijo(
    fp_map: FixedPointMap,
    x0: Vector,
    config: LineSearchConfig,
    max_iters: int,
    residual_tol: float,
    *,
    diag_c: float = 1e-8,
) -> RunResult:
    """Krasnosel'skii-Mann iteration with potential-function backtracking steps."""
    x = vector(x0)
    if x.shape != (fp_map.dim,):
        raise ValueError(f"x0 has dim {x.shape[0]}, map expects {fp_map.dim}")

    tx = fp_map(x)
    r = x - tx
    rn = norm(r)
    records: list[IterationRecord] = []
    n = 0
    terminated_by = ITERATION_CAP

    while True:
        if rn <= residual_tol:
            records.append(_terminal_record(n, rn))
            terminated_by = RESIDUAL_ZERO
            break
        if n >= max_iters:
            records.append(_terminal_record(n, rn))
            terminated_by = ITERATION_CAP
            break

        started = time.perf_counter_ns()
        d = tx - x
        outcome = armijo_backtrack(fp_map, x, config)
        descent_ok = descent_check(r, d, diag_c)
        if not outcome.satisfied:
            records.append(
                IterationRecord(
                    n=n,
                    residual_norm=rn,
                    alpha=0.0,
                    beta_value=0.0,
                    ls_probes=outcome.probes,
                    ls_satisfied=False,
                    used_fallback=False,
                    descent_ok=descent_ok,
                    elapsed_ns=time.perf_counter_ns() - started,
                )
            )
            terminated_by = LINESEARCH_FAILURE
            break

        x_next = axpy(outcome.alpha, d, x)
        tx_next = fp_map(x_next)
        r_next = x_next - tx_next
        rn_next = norm(r_next)

        records.append(
            IterationRecord(
                n=n,
                residual_norm=rn,
                alpha=outcome.alpha,
                beta_value=0.0,
                ls_probes=outcome.probes,
                ls_satisfied=True,
                used_fallback=False,
                descent_ok=descent_ok,
                elapsed_ns=time.perf_counter_ns() - started,
            )
        )
        x, tx, r, rn = x_next, tx_next, r_next, rn_next
        n += 1

    return RunResult(final_point=x, records=tuple(records), terminated_by=terminated_by)


def rate_bound(
    records: tuple[IterationRecord, ...] | list[IterationRecord],
    variant: str,
    delta: float,
    sigma: float,
    diag_c: float,
) -> list[float]:
    """Per-record theoretical upper bound on the residual norm.

    For record n the bound uses the recorded steps alpha_0..alpha_n (the
    terminal row, which has no step, reuses the full prefix):

      sd:         ||r0|| / sqrt(delta * S_n)
      dy:         ||r0|| / sqrt(delta/(1+sigma) * S_n)
      fr:         ||r0|| / sqrt(delta/(1-sigma) * sum_k (1-2*sigma+sigma^k)*alpha_k)
      prp+/hs+:   ||r0|| / sqrt(diag_c * delta * S_n)

    with S_n = sum_{k<=n} alpha_k. The dy/fr bounds presuppose the strong
    curvature condition held at every step, and the prp+/hs+ bounds that the
    descent diagnostic held with constant diag_c; callers enforce those
    premises. There is no bound for the hz variant.
    """
    if variant not in (SD, DY, FR, PRP_PLUS, HS_PLUS):
        raise ValueError(f"no rate bound for variant {variant!r}")
    if not records:
        raise ValueError("records must be nonempty")
    r0 = records[0].residual_norm
    s_alpha = 0.0
    s_fr = 0.0
    bounds: list[float] = []
    for rec in records:
        if rec.alpha > 0.0:
            s_alpha += rec.alpha
            s_fr += (1.0 - 2.0 * sigma + sigma**rec.n) * rec.alpha
        if variant == SD:
            denom = delta * s_alpha
        elif variant == DY:
            denom = delta / (1.0 + sigma) * s_alpha
        elif variant == FR:
            denom = delta / (1.0 - sigma) * s_fr
        else:
            denom = diag_c * delta * s_alpha
        bounds.append(r0 / math.sqrt(denom) if denom > 0.0 else math.inf)
    return bounds


def _assert_rate_bounds(result: RunResult, config: SolverConfig) -> None:
    """Opt-in post-run verification of the per-iteration rate bounds.

    Only asserts when the variant's hypotheses verifiably held along the whole
    trace; otherwise the bounds are not theorems for this run and the check is
    skipped.
    """
    variant = config.beta_kind
    if variant == HZ:
        return
    executed = [rec for rec in result.records if rec.alpha > 0.0]
    if not executed:
        return
    all_satisfied = all(rec.ls_satisfied and not rec.used_fallback for rec in executed)
    if not all_satisfied:
        return
    if variant in (DY, FR) and config.linesearch.mode != STRONG_WOLFE:
        return
    if variant in (PRP_PLUS, HS_PLUS) and not all(rec.descent_ok for rec in executed):
        return
    ls = config.linesearch
    bounds = rate_bound(result.records, variant, ls.delta, ls.sigma, config.diag_c)
    for rec, bound in zip(result.records, bounds):
        if rec.residual_norm > bound * (1.0 + 1e-9):
            raise RateBoundError(
                f"residual {rec.residual_norm!r} exceeds {variant} bound {bound!r} at n={rec.n}"
            )
