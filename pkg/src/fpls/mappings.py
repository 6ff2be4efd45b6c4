"""Nonexpansive mappings: ball projections, gradient oracles, composed maps.

Every map built here is nonexpansive by construction when its preconditions
hold (projection onto a convex set is nonexpansive; so is Id - lam*grad f for
lam in (0, 2/L]). Nonexpansivity is nevertheless verified by sampled property
tests rather than assumed, since caller-supplied parameters can violate the
preconditions silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Vector, check_same_dim, dot, vector

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball {x : ||x - center|| <= radius}."""

    center: Vector
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", vector(self.center))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class DiagonalQuadratic:
    """Quadratic f(x) = 0.5 <x, Qx> + <linear, x> with diagonal PSD Q.

    ``eigenvalues`` is the diagonal of Q; ``lambda_max`` its largest entry,
    which is also the Lipschitz constant of the gradient.
    """

    eigenvalues: Vector
    linear: Vector
    lambda_max: float = field(default=0.0)

    def __post_init__(self):
        ev = vector(self.eigenvalues)
        lin = vector(self.linear)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "linear", lin)
        check_same_dim(ev, lin)
        lam = self.lambda_max if self.lambda_max > 0 else float(ev.max())
        object.__setattr__(self, "lambda_max", lam)
        if lam <= 0:
            raise ValueError("lambda_max must be positive")
        if (ev < 0).any() or (ev > lam).any():
            raise ValueError("eigenvalues must lie in [0, lambda_max]")

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def value(self, x: Vector) -> float:
        check_same_dim(self.eigenvalues, x)
        return 0.5 * float(np.dot(x, self.eigenvalues * x)) + float(np.dot(self.linear, x))


@dataclass(frozen=True)
class FixedPointMap:
    """Evaluation oracle for a (purportedly) nonexpansive T: R^d -> R^d."""

    evaluate: Callable[[Vector], Vector]
    dim: int
    descriptor: str = ""

    def __call__(self, x: Vector) -> Vector:
        if x.shape != (self.dim,):
            raise ValueError(f"map expects dim {self.dim}, got shape {x.shape}")
        out = self.evaluate(x)
        if out.shape != (self.dim,):
            raise ValueError(f"map broke dimension: in {x.shape}, out {out.shape}")
        return out


def project_ball(x: Vector, ball: Ball) -> Vector:
    """Metric projection onto a closed ball (exact closed form).

    Points with ||x - center|| <= radius (boundary included) map to themselves.
    """
    check_same_dim(x, ball.center)
    diff = x - ball.center
    dist = math.sqrt(float(np.dot(diff, diff)))
    if dist <= ball.radius:
        return x
    return ball.center + (ball.radius / dist) * diff


def qp_gradient(q: DiagonalQuadratic, x: Vector) -> Vector:
    """Gradient Qx + b of the diagonal quadratic."""
    check_same_dim(q.eigenvalues, x)
    return q.eigenvalues * x + q.linear


def make_projected_gradient_map(q: DiagonalQuadratic, ball: Ball, lam: float) -> FixedPointMap:
    """T(x) = P_ball(x - lam * (Qx + b)); nonexpansive for lam in (0, 2/lambda_max].

    Fixed points of T are exactly the minimizers of the quadratic over the ball.
    """
    check_same_dim(q.eigenvalues, ball.center)
    if not (0.0 < lam <= 2.0 / q.lambda_max):
        raise ValueError(f"lam must lie in (0, {2.0 / q.lambda_max}], got {lam}")

    def evaluate(x: Vector) -> Vector:
        return project_ball(x - lam * qp_gradient(q, x), ball)

    return FixedPointMap(
        evaluate=evaluate,
        dim=q.dim,
        descriptor=f"projected_gradient(dim={q.dim}, lam={lam!r}, lambda_max={q.lambda_max!r})",
    )


def make_gcfp_map(outer: Ball, inner: list[Ball], weights: list[float]) -> FixedPointMap:
    """T(x) = P_outer(sum_i w_i * P_inner_i(x)) for the convex-feasibility objective.

    Weights must be positive and sum to 1 (within 1e-12); all balls must share
    the outer ball's dimension.
    """
    if len(inner) == 0:
        raise ValueError("need at least one inner ball")
    if len(weights) != len(inner):
        raise ValueError(f"{len(weights)} weights for {len(inner)} balls")
    w = np.asarray(weights, dtype=np.float64)
    if (w <= 0).any():
        raise ValueError("weights must be positive")
    if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    dim = outer.dim
    for b in inner:
        if b.dim != dim:
            raise ValueError(f"dimension mismatch: outer {dim}, inner {b.dim}")

    centers = np.vstack([b.center for b in inner])
    radii = np.array([b.radius for b in inner])
    w = w.copy()

    def evaluate(x: Vector) -> Vector:
        diffs = x[None, :] - centers
        dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
        factors = np.ones_like(dists)
        outside = dists > radii
        factors[outside] = radii[outside] / dists[outside]
        projections = centers + factors[:, None] * diffs
        return project_ball(w @ projections, outer)

    return FixedPointMap(
        evaluate=evaluate,
        dim=dim,
        descriptor=f"gcfp(dim={dim}, m={len(inner)})",
    )


def residual(fp_map: FixedPointMap, x: Vector) -> Vector:
    """The fixed-point residual x - T(x); zero exactly on Fix(T)."""
    return x - fp_map(x)


def gcfp_objective(x: Vector, inner: list[Ball], weights: list[float]) -> float:
    """Weighted mean-square distance from x to the inner balls.

    This is the objective whose minimizers over the outer ball are the fixed
    points of the corresponding composed map; used by grid oracles in tests.
    """
    total = 0.0
    for w, b in zip(weights, inner):
        diff = x - b.center
        dist = math.sqrt(float(np.dot(diff, diff)))
        total += w * max(dist - b.radius, 0.0) ** 2
    return total
