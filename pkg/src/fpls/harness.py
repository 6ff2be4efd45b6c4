"""Benchmark harness: instance generators, experiments, and artifact emission.

Two problem families are generated, both as fixed-point problems for a
nonexpansive map on a unit ball:

* qp_ball - minimize a diagonal positive-semidefinite quadratic over a unit
  ball via the projected-gradient map with lam = 2/lambda_max;
* gcfp - minimize the weighted mean-square distance to m unit balls over an
  outer unit ball via the project-the-weighted-average map.

Instances are rebuildable bit-for-bit from (kind, dim, seed). An experiment
runs one algorithm from I random initial points, aggregates the per-iteration
traces, and computes the satisfiability rate

    SR = 100 * (sum of satisfied iterations) / (sum of executed iterations),

the percentage of iterations whose step met the configured conditions on the
iteration's own search direction.

Artifacts: a deterministic trace CSV (no timing columns, floats at 17
significant digits), a separate non-deterministic timing CSV, a key=value
summary, and two-column mean-series files for plotting. All files are written
atomically (temp-then-rename).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Rng, Vector, derived_seed, sample_uniform_box, vector
from .linesearch import ARMIJO_POTENTIAL, WOLFE, LineSearchConfig
from .mappings import Ball, DiagonalQuadratic, FixedPointMap, make_gcfp_map, make_projected_gradient_map, qp_gradient
from .solver import (
    IterationRecord,
    RunResult,
    SolverConfig,
    run_algorithm1,
    run_km_armijo,
    run_km_constant,
)

QP_BALL = "qp_ball"
GCFP = "gcfp"
KINDS = (QP_BALL, GCFP)

SD1 = "sd1"
SD2 = "sd2"
ALGOS = ("sd1", "sd2", "sd3", "fr", "prp+", "hs+", "dy", "hz")
_ALGO_TO_BETA = {"sd3": "sd", "fr": "fr", "prp+": "prp+", "hs+": "hs+", "dy": "dy", "hz": "hz"}

BOX_HALF_WIDTH = 32.0
BALL_RADIUS = 1.0
KM_CONSTANT_ALPHA = 0.5
DEFAULT_GCFP_M = 99

_TAG_QP = 1
_TAG_GCFP = 2
_TAG_X0 = 3
_MAX_REGEN = 1000


@dataclass(frozen=True)
class ProblemInstance:
    """A generated benchmark instance, reproducible from (kind, dim, seed)."""

    kind: str
    dim: int
    seed: int
    qp: tuple[DiagonalQuadratic, Ball] | None
    gcfp: tuple[Ball, tuple[Ball, ...], tuple[float, ...]] | None
    descriptor: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if (self.qp is None) == (self.gcfp is None):
            raise ValueError("exactly one of qp/gcfp must be populated")
        if (self.kind == QP_BALL) != (self.qp is not None):
            raise ValueError(f"kind {self.kind!r} does not match populated payload")

    def build_map(self) -> FixedPointMap:
        if self.qp is not None:
            q, ball = self.qp
            return make_projected_gradient_map(q, ball, 2.0 / q.lambda_max)
        outer, inner, weights = self.gcfp
        return make_gcfp_map(outer, list(inner), list(weights))


def gen_qp(dim: int, seed: int) -> ProblemInstance:
    """Quadratic-over-ball instance: eigenvalues 0 = l_1 <= ... <= l_d = dim,
    interior eigenvalues uniform on [0, dim], b and the ball center uniform on
    the (-32, 32) box, radius 1.

    Regenerates (deterministically) in the rare event that the certificate
    ||grad f(center)|| > lambda_max * radius fails, which guarantees the
    gradient has no zero inside the ball.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    for attempt in range(_MAX_REGEN):
        rng = Rng(derived_seed(seed, _TAG_QP, attempt))
        interior = np.sort(rng.uniform(0.0, float(dim), dim - 2))
        eigenvalues = vector(np.concatenate(([0.0], interior, [float(dim)])))
        linear = sample_uniform_box(rng, dim, -BOX_HALF_WIDTH, BOX_HALF_WIDTH)
        center = sample_uniform_box(rng, dim, -BOX_HALF_WIDTH, BOX_HALF_WIDTH)
        q = DiagonalQuadratic(eigenvalues=eigenvalues, linear=linear, lambda_max=float(dim))
        ball = Ball(center=center, radius=BALL_RADIUS)
        grad_at_center = qp_gradient(q, center)
        if float(np.linalg.norm(grad_at_center)) > q.lambda_max * ball.radius:
            return ProblemInstance(
                kind=QP_BALL,
                dim=dim,
                seed=seed,
                qp=(q, ball),
                gcfp=None,
                descriptor=f"qp_ball(dim={dim}, seed={seed}, attempt={attempt})",
            )
    raise RuntimeError(f"could not generate a valid qp instance for dim={dim}, seed={seed}")


def gen_gcfp(dim: int, seed: int, m: int = DEFAULT_GCFP_M) -> ProblemInstance:
    """Convex-feasibility instance: m inner unit balls plus the outer one,
    centers uniform on the (-32, 32) box, weights 1/m.

    Regenerates until some pair of balls has center distance > 2, certifying
    that the balls have empty common intersection.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    for attempt in range(_MAX_REGEN):
        rng = Rng(derived_seed(seed, _TAG_GCFP, attempt))
        centers = [sample_uniform_box(rng, dim, -BOX_HALF_WIDTH, BOX_HALF_WIDTH) for _ in range(m + 1)]
        if m >= 1 and _has_disjoint_pair(centers):
            outer = Ball(center=centers[0], radius=BALL_RADIUS)
            inner = tuple(Ball(center=c, radius=BALL_RADIUS) for c in centers[1:])
            weights = (1.0 / m,) * m
            return ProblemInstance(
                kind=GCFP,
                dim=dim,
                seed=seed,
                qp=None,
                gcfp=(outer, inner, weights),
                descriptor=f"gcfp(dim={dim}, seed={seed}, m={m}, attempt={attempt})",
            )
    raise RuntimeError(f"could not generate a valid gcfp instance for dim={dim}, seed={seed}")


def _has_disjoint_pair(centers: list[Vector]) -> bool:
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if float(np.linalg.norm(centers[i] - centers[j])) > 2.0 * BALL_RADIUS:
                return True
    return False


def generate_instance(kind: str, dim: int, seed: int, *, gcfp_m: int = DEFAULT_GCFP_M) -> ProblemInstance:
    if kind == QP_BALL:
        return gen_qp(dim, seed)
    if kind == GCFP:
        return gen_gcfp(dim, seed, m=gcfp_m)
    raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


def trace_counts(records) -> tuple[int, int]:
    """(satisfied iterations, executed iterations) for one trace."""
    n1 = sum(1 for rec in records if rec.ls_satisfied)
    n2 = sum(1 for rec in records if rec.alpha > 0.0)
    return n1, n2


def satisfiability_rate(traces) -> float:
    """SR over a collection of traces, in percent."""
    traces = list(traces)
    if not traces:
        raise ValueError("traces must be nonempty")
    total_n1 = 0
    total_n2 = 0
    for records in traces:
        n1, n2 = trace_counts(records)
        total_n1 += n1
        total_n2 += n2
    if total_n2 == 0:
        raise ValueError("no executed iterations; SR undefined")
    return 100.0 * total_n1 / total_n2


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to replay an experiment deterministically."""

    algo: str
    kind: str
    dim: int
    seeds: tuple[int, ...]
    instance_seed: int = 0
    delta: float = 0.3
    sigma: float = 0.5
    mode: str = WOLFE
    max_probes: int = 60
    max_iters: int = 10
    residual_tol: float = 1e-12
    gcfp_m: int = DEFAULT_GCFP_M

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if len(self.seeds) < 1:
            raise ValueError("need at least one sample seed")
        if self.algo not in (SD1, SD2) and self.mode == ARMIJO_POTENTIAL:
            raise ValueError(f"algo {self.algo!r} needs a wolfe or strong_wolfe mode")
        # Surface bad search parameters at construction time.
        probe_mode = self.mode if self.algo not in (SD1, SD2) else WOLFE
        LineSearchConfig(delta=self.delta, sigma=self.sigma, mode=probe_mode, max_probes=self.max_probes)

    @property
    def samples(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class ExperimentReport:
    algo_name: str
    descriptor: str
    samples: int
    sr_percent: float
    traces: tuple[tuple[IterationRecord, ...], ...]
    terminations: tuple[str, ...]
    series_iter: tuple[tuple[int, float], ...]
    series_time: tuple[tuple[float, float], ...]
    mean_final_residual: float
    config: ExperimentConfig


def initial_point(seed: int, dim: int) -> Vector:
    """Initial iterate for one sample: uniform on the instance-data box."""
    return sample_uniform_box(Rng(seed), dim, -BOX_HALF_WIDTH, BOX_HALF_WIDTH)


def run_sample(algo: str, fp_map: FixedPointMap, x0: Vector, cfg: ExperimentConfig) -> RunResult:
    """Run one algorithm from one initial point under the experiment settings."""
    if algo == SD1:
        return run_km_constant(
            fp_map,
            x0,
            KM_CONSTANT_ALPHA,
            cfg.max_iters,
            cfg.residual_tol,
            predicate_config=LineSearchConfig(delta=cfg.delta, sigma=cfg.sigma),
        )
    if algo == SD2:
        ls = LineSearchConfig(
            delta=cfg.delta,
            sigma=cfg.sigma,
            mode=ARMIJO_POTENTIAL,
            max_probes=cfg.max_probes,
            armijo_D=cfg.delta,
        )
        return run_km_armijo(fp_map, x0, ls, cfg.max_iters, cfg.residual_tol)
    solver_cfg = SolverConfig(
        beta_kind=_ALGO_TO_BETA[algo],
        linesearch=LineSearchConfig(
            delta=cfg.delta, sigma=cfg.sigma, mode=cfg.mode, max_probes=cfg.max_probes
        ),
        max_iters=cfg.max_iters,
        residual_tol=cfg.residual_tol,
    )
    return run_algorithm1(fp_map, x0, solver_cfg)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentReport:
    """Run one (algorithm, problem) cell over all sample seeds.

    Samples are independent; each draws its initial point from its own seeded
    stream, so aggregation order equals seed order regardless of how samples
    would be scheduled. When out_dir is given, writes trace.csv, timing.csv,
    summary.txt, series_iter.txt, and series_time.txt into it.
    """
    instance = generate_instance(cfg.kind, cfg.dim, cfg.instance_seed, gcfp_m=cfg.gcfp_m)
    fp_map = instance.build_map()

    traces: list[tuple[IterationRecord, ...]] = []
    terminations: list[str] = []
    for seed in cfg.seeds:
        x0 = initial_point(seed, cfg.dim)
        result = run_sample(cfg.algo, fp_map, x0, cfg)
        traces.append(result.records)
        terminations.append(result.terminated_by)

    total_n2 = sum(trace_counts(t)[1] for t in traces)
    sr = 100.0 if total_n2 == 0 else satisfiability_rate(traces)
    series_iter, series_time = aggregate_series(traces)
    mean_final = float(np.mean([t[-1].residual_norm for t in traces]))

    report = ExperimentReport(
        algo_name=cfg.algo,
        descriptor=instance.descriptor,
        samples=cfg.samples,
        sr_percent=sr,
        traces=tuple(traces),
        terminations=tuple(terminations),
        series_iter=series_iter,
        series_time=series_time,
        mean_final_residual=mean_final,
        config=cfg,
    )
    if out_dir is not None:
        write_report_files(report, Path(out_dir))
    return report


def aggregate_series(
    traces,
) -> tuple[tuple[tuple[int, float], ...], tuple[tuple[float, float], ...]]:
    """Mean residual vs iteration and vs cumulative elapsed seconds.

    Series length is the longest trace; shorter traces are padded with their
    terminal residual (and total elapsed time).
    """
    length = max(len(t) for t in traces)
    res = np.empty((len(traces), length))
    cum = np.empty((len(traces), length))
    for i, trace in enumerate(traces):
        residuals = [rec.residual_norm for rec in trace]
        elapsed = np.cumsum([0.0] + [rec.elapsed_ns for rec in trace[:-1]]) / 1e9
        pad = length - len(trace)
        res[i] = residuals + [residuals[-1]] * pad
        cum[i] = np.concatenate([elapsed, np.full(pad, elapsed[-1])])
    mean_res = res.mean(axis=0)
    mean_cum = cum.mean(axis=0)
    series_iter = tuple((n, float(mean_res[n])) for n in range(length))
    series_time = tuple((float(mean_cum[n]), float(mean_res[n])) for n in range(length))
    return series_iter, series_time


def _fmt(v: float) -> str:
    return format(v, ".17g")


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


TRACE_HEADER = "sample,iter,residual,alpha,beta,ls_probes,ls_satisfied,used_fallback,descent_ok"


def trace_csv_text(traces, metadata: dict | None = None) -> str:
    """Deterministic trace CSV: one row per executed iteration.

    Optional metadata is embedded as leading '# key=value' comment lines so a
    single file carries everything needed to replay and re-verify it.
    """
    lines = []
    if metadata:
        lines.extend(f"# {k}={v}" for k, v in metadata.items())
    lines.append(TRACE_HEADER)
    for sample, trace in enumerate(traces):
        for rec in trace:
            if rec.alpha <= 0.0:
                continue
            lines.append(
                f"{sample},{rec.n},{_fmt(rec.residual_norm)},{_fmt(rec.alpha)},"
                f"{_fmt(rec.beta_value)},{rec.ls_probes},{int(rec.ls_satisfied)},"
                f"{int(rec.used_fallback)},{int(rec.descent_ok)}"
            )
    return "\n".join(lines) + "\n"


def timing_csv_text(traces) -> str:
    lines = ["sample,iter,elapsed_ns"]
    for sample, trace in enumerate(traces):
        for rec in trace:
            if rec.alpha <= 0.0:
                continue
            lines.append(f"{sample},{rec.n},{rec.elapsed_ns}")
    return "\n".join(lines) + "\n"


def series_text(series) -> str:
    return "".join(f"{_fmt(float(a))} {_fmt(float(b))}\n" for a, b in series)


def summary_metadata(report: ExperimentReport) -> dict:
    cfg = report.config
    return {
        "algo": cfg.algo,
        "kind": cfg.kind,
        "dim": cfg.dim,
        "I": cfg.samples,
        "sr_percent": _fmt(report.sr_percent),
        "mean_final_residual": _fmt(report.mean_final_residual),
        "instance_seed": cfg.instance_seed,
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "delta": _fmt(cfg.delta),
        "sigma": _fmt(cfg.sigma),
        "mode": cfg.mode,
        "max_probes": cfg.max_probes,
        "max_iters": cfg.max_iters,
        "residual_tol": _fmt(cfg.residual_tol),
        "gcfp_m": cfg.gcfp_m,
        "descriptor": report.descriptor,
    }


def write_report_files(report: ExperimentReport, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    meta = summary_metadata(report)
    atomic_write(out_dir / "summary.txt", "".join(f"{k}={v}\n" for k, v in meta.items()))
    atomic_write(out_dir / "trace.csv", trace_csv_text(report.traces))
    atomic_write(out_dir / "timing.csv", timing_csv_text(report.traces))
    atomic_write(out_dir / "series_iter.txt", series_text(report.series_iter))
    atomic_write(out_dir / "series_time.txt", series_text(report.series_time))
