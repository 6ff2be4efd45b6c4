"""Command-line front end.

Subcommands:

* solve      - one trajectory on a generated instance; writes a trace CSV with
               embedded '# key=value' replay metadata.
* experiment - one (algorithm, problem, dim) cell over many initial points.
* reproduce  - the full benchmark table (8 algorithms x 2 problems) at desk or
               paper scale.
* verify     - replay emitted traces and re-check every accepted step's
               conditions in non-strict form.

Exit codes: solve returns 0 when the run reached a zero residual, 2 on the
iteration cap, 3 on line-search failure; bad flag values exit 1. verify exits
0 when clean and 4 when any replayed check fails.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Vector, axpy, derived_seed, norm
from .harness import (
    ALGOS,
    DEFAULT_GCFP_M,
    GCFP,
    KINDS,
    QP_BALL,
    SD1,
    SD2,
    ExperimentConfig,
    atomic_write,
    generate_instance,
    initial_point,
    run_experiment,
    run_sample,
    trace_csv_text,
)
from .linesearch import STRONG_WOLFE, WOLFE
from .mappings import FixedPointMap
from .solver import ITERATION_CAP, LINESEARCH_FAILURE, RESIDUAL_ZERO

_TAG_X0 = 3  # matches the harness initial-point namespace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ITERATION_CAP = 2
EXIT_LINESEARCH_FAILURE = 3
EXIT_VERIFY_FAILED = 4

_TERMINATION_EXIT = {
    RESIDUAL_ZERO: EXIT_OK,
    ITERATION_CAP: EXIT_ITERATION_CAP,
    LINESEARCH_FAILURE: EXIT_LINESEARCH_FAILURE,
}

_PROBLEM_FLAG = {"qp": QP_BALL, "gcfp": GCFP}
_MODE_FLAG = {"wolfe": WOLFE, "strong-wolfe": STRONG_WOLFE}

DESK_DIMS = (100, 1000)
DESK_SAMPLES = 20
PAPER_DIMS = (1000, 10000)
PAPER_SAMPLES = 100


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the CLI contract reserves 2 for the
    iteration cap, so remap usage errors to exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="fpls", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    solve = sub.add_parser("solve", help="run one trajectory and write its trace CSV")
    _add_problem_flags(solve)
    solve.add_argument("--algo", required=True, choices=ALGOS)
    _add_search_flags(solve)
    solve.add_argument("--x0-seed", type=int, default=None,
                       help="seed for the initial point (default: derived from --seed)")
    solve.add_argument("--out", type=Path, required=True, help="trace CSV path")

    exp = sub.add_parser("experiment", help="run one algorithm over many initial points")
    _add_problem_flags(exp)
    exp.add_argument("--algo", required=True, choices=ALGOS)
    _add_search_flags(exp)
    exp.add_argument("--samples", type=int, default=DESK_SAMPLES, help="number of initial points I")
    exp.add_argument("--seed-base", type=int, default=0, help="sample i uses seed seed-base + i")
    exp.add_argument("--out-dir", type=Path, required=True)

    rep = sub.add_parser("reproduce", help="regenerate the benchmark tables and series")
    rep.add_argument("--scale", choices=("desk", "paper"), default="desk")
    rep.add_argument("--out-dir", type=Path, required=True)
    rep.add_argument("--dims", type=str, default=None, help="comma-separated dims overriding the scale")
    rep.add_argument("--samples", type=int, default=None, help="override the scale's sample count")
    rep.add_argument("--seed-base", type=int, default=0)
    rep.add_argument("--instance-seed", type=int, default=0)
    rep.add_argument("--gcfp-m", type=int, default=DEFAULT_GCFP_M)
    rep.add_argument("--problems", type=str, default="qp,gcfp")
    rep.add_argument("--algos", type=str, default=",".join(ALGOS))

    ver = sub.add_parser("verify", help="replay traces and re-check accepted steps")
    ver.add_argument("paths", nargs="+", type=Path,
                     help="solve trace CSVs and/or experiment directories")
    return parser


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True, choices=sorted(_PROBLEM_FLAG))
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="instance seed")
    p.add_argument("--gcfp-m", type=int, default=DEFAULT_GCFP_M, help="inner ball count for gcfp")


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--mode", choices=sorted(_MODE_FLAG), default="wolfe")
    p.add_argument("--max-probes", type=int, default=60)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-12)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.subcommand == "solve":
            return cmd_solve(args, argv)
        if args.subcommand == "experiment":
            return cmd_experiment(args, argv)
        if args.subcommand == "reproduce":
            return cmd_reproduce(args, argv)
        return cmd_verify(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _experiment_config(args, seeds: tuple[int, ...]) -> ExperimentConfig:
    return ExperimentConfig(
        algo=args.algo,
        kind=_PROBLEM_FLAG[args.problem],
        dim=args.dim,
        seeds=seeds,
        instance_seed=args.seed,
        delta=args.delta,
        sigma=args.sigma,
        mode=_MODE_FLAG[args.mode],
        max_probes=args.max_probes,
        max_iters=args.max_iters,
        residual_tol=args.tol,
        gcfp_m=args.gcfp_m,
    )


def cmd_solve(args, argv: list[str]) -> int:
    x0_seed = args.x0_seed if args.x0_seed is not None else derived_seed(args.seed, _TAG_X0)
    cfg = _experiment_config(args, seeds=(x0_seed,))
    instance = generate_instance(cfg.kind, cfg.dim, cfg.instance_seed, gcfp_m=cfg.gcfp_m)
    fp_map = instance.build_map()
    x0 = initial_point(x0_seed, cfg.dim)
    result = run_sample(cfg.algo, fp_map, x0, cfg)

    metadata = {
        "command": "fpls " + " ".join(argv),
        "algo": cfg.algo,
        "kind": cfg.kind,
        "dim": cfg.dim,
        "instance_seed": cfg.instance_seed,
        "x0_seed": x0_seed,
        "delta": repr(cfg.delta),
        "sigma": repr(cfg.sigma),
        "mode": cfg.mode,
        "max_probes": cfg.max_probes,
        "max_iters": cfg.max_iters,
        "residual_tol": repr(cfg.residual_tol),
        "gcfp_m": cfg.gcfp_m,
    }
    atomic_write(args.out, trace_csv_text([result.records], metadata))
    final = result.records[-1].residual_norm
    print(f"final residual: {final:.17g}")
    print(f"terminated_by: {result.terminated_by}")
    print(f"trace: {args.out}")
    return _TERMINATION_EXIT[result.terminated_by]


def cmd_experiment(args, argv: list[str]) -> int:
    seeds = tuple(range(args.seed_base, args.seed_base + args.samples))
    cfg = _experiment_config(args, seeds=seeds)
    report = run_experiment(cfg, out_dir=args.out_dir)
    print(f"command: fpls {' '.join(argv)}")
    print(f"algo={report.algo_name} kind={cfg.kind} dim={cfg.dim} I={cfg.samples}")
    print(f"sr_percent={report.sr_percent:.17g}")
    print(f"mean_final_residual={report.mean_final_residual:.17g}")
    print(f"artifacts: {args.out_dir}")
    return EXIT_OK


def cmd_reproduce(args, argv: list[str]) -> int:
    if args.scale == "desk":
        dims = DESK_DIMS
        samples = DESK_SAMPLES
    else:
        dims = PAPER_DIMS
        samples = PAPER_SAMPLES
    if args.dims is not None:
        dims = tuple(int(tok) for tok in args.dims.split(","))
    if args.samples is not None:
        samples = args.samples
    problems = tuple(_PROBLEM_FLAG[tok] for tok in args.problems.split(","))
    algos = tuple(args.algos.split(","))
    for algo in algos:
        if algo not in ALGOS:
            raise ValueError(f"unknown algo {algo!r}")
    seeds = tuple(range(args.seed_base, args.seed_base + samples))

    table_lines = ["kind dim algo sr_percent"]
    failures: list[str] = []
    for kind in problems:
        for dim in dims:
            for algo in algos:
                cell = f"{kind}_d{dim}/{algo}"
                cfg = ExperimentConfig(
                    algo=algo,
                    kind=kind,
                    dim=dim,
                    seeds=seeds,
                    instance_seed=args.instance_seed,
                    gcfp_m=args.gcfp_m,
                )
                try:
                    report = run_experiment(cfg, out_dir=args.out_dir / kind.replace("_ball", "") / f"d{dim}" / algo)
                except Exception as exc:  # report per cell, keep going
                    failures.append(f"{cell}: {exc}")
                    print(f"[FAIL] {cell}: {exc}", file=sys.stderr)
                    continue
                line = f"{kind} {dim} {algo} {report.sr_percent:.17g}"
                table_lines.append(line)
                print(line)
    atomic_write(args.out_dir / "sr_table.txt", "\n".join(table_lines) + "\n")
    if failures:
        print(f"{len(failures)} cell(s) aborted", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: replay traces with the recorded steps, re-evaluating T along the
# way, and re-check every accepted step's conditions in non-strict form.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _TraceRow:
    sample: int
    n: int
    residual: float
    alpha: float
    beta: float
    ls_probes: int
    ls_satisfied: bool
    used_fallback: bool
    descent_ok: bool


def _parse_trace_csv(path: Path) -> tuple[dict, list[_TraceRow]]:
    metadata: dict = {}
    rows: list[_TraceRow] = []
    header_seen = False
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            metadata[key] = value
            continue
        if not line.strip():
            continue
        if not header_seen:
            header_seen = True
            continue
        parts = line.split(",")
        rows.append(
            _TraceRow(
                sample=int(parts[0]),
                n=int(parts[1]),
                residual=float(parts[2]),
                alpha=float(parts[3]),
                beta=float(parts[4]),
                ls_probes=int(parts[5]),
                ls_satisfied=bool(int(parts[6])),
                used_fallback=bool(int(parts[7])),
                descent_ok=bool(int(parts[8])),
            )
        )
    return metadata, rows


def _parse_summary(path: Path) -> dict:
    metadata: dict = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition("=")
        metadata[key] = value
    return metadata


def _replay_sample(
    algo: str,
    fp_map: FixedPointMap,
    x0: Vector,
    rows: list[_TraceRow],
    *,
    delta: float,
    sigma: float,
    mode: str,
    armijo_D: float,
    armijo_beta: float,
    label: str,
) -> list[str]:
    """Re-execute one trajectory from its recorded steps; return violations."""
    problems: list[str] = []
    x = x0
    tx = fp_map(x)
    r = x - tx
    d = -r
    expected_n = 0
    for row in rows:
        if row.n != expected_n:
            problems.append(f"{label} n={row.n}: expected iteration {expected_n}")
            break
        expected_n += 1
        rn = norm(r)
        if rn != row.residual:
            problems.append(f"{label} n={row.n}: residual mismatch (recorded {row.residual!r}, replayed {rn!r})")
        if algo in (SD1, SD2):
            d_eff = tx - x
        else:
            d_eff = (tx - x) if row.used_fallback else d
        p0 = float(np.dot(r, r))
        rd0 = float(np.dot(r, d_eff))
        x_next = axpy(row.alpha, d_eff, x)
        tx_next = fp_map(x_next)
        r_next = x_next - tx_next
        pt = float(np.dot(r_next, r_next))
        qd = float(np.dot(r_next, d_eff))
        if row.ls_satisfied:
            if algo == SD2:
                g_alpha = pt - armijo_beta * row.alpha * (1.0 - row.alpha) * p0
                ok = g_alpha - p0 <= -armijo_D * row.alpha * p0
            else:
                ok = pt - p0 <= delta * row.alpha * rd0
                if mode == STRONG_WOLFE:
                    ok = ok and abs(qd) <= -sigma * rd0
                else:
                    ok = ok and qd >= sigma * rd0
            if not ok:
                problems.append(f"{label} n={row.n}: accepted step fails its conditions at alpha={row.alpha!r}")
        if algo not in (SD1, SD2):
            d = -r_next + row.beta * d_eff
        x, tx, r = x_next, tx_next, r_next
    return problems


def _verify_one(metadata: dict, rows: list[_TraceRow], source: str) -> list[str]:
    kind = metadata["kind"]
    algo = metadata["algo"]
    dim = int(metadata["dim"])
    instance_seed = int(metadata["instance_seed"])
    gcfp_m = int(metadata.get("gcfp_m", DEFAULT_GCFP_M))
    delta = float(metadata["delta"])
    sigma = float(metadata["sigma"])
    mode = metadata.get("mode", WOLFE)
    instance = generate_instance(kind, dim, instance_seed, gcfp_m=gcfp_m)
    fp_map = instance.build_map()

    if "seeds" in metadata:
        sample_seeds = [int(tok) for tok in metadata["seeds"].split(",")]
    else:
        sample_seeds = [int(metadata["x0_seed"])]

    problems: list[str] = []
    by_sample: dict[int, list[_TraceRow]] = {}
    for row in rows:
        by_sample.setdefault(row.sample, []).append(row)
    for sample, sample_rows in sorted(by_sample.items()):
        if sample >= len(sample_seeds):
            problems.append(f"{source} sample {sample}: no seed recorded")
            continue
        x0 = initial_point(sample_seeds[sample], dim)
        problems.extend(
            _replay_sample(
                algo,
                fp_map,
                x0,
                sample_rows,
                delta=delta,
                sigma=sigma,
                mode=mode,
                armijo_D=delta,
                armijo_beta=0.5,
                label=f"{source} sample {sample}",
            )
        )
    return problems


def cmd_verify(args) -> int:
    targets: list[tuple[dict, list[_TraceRow], str]] = []
    for path in args.paths:
        if path.is_dir():
            summaries = sorted(path.rglob("summary.txt"))
            if not summaries:
                print(f"error: no summary.txt under {path}", file=sys.stderr)
                return EXIT_USAGE
            for summary in summaries:
                trace = summary.parent / "trace.csv"
                if not trace.is_file():
                    print(f"error: missing {trace}", file=sys.stderr)
                    return EXIT_USAGE
                _, rows = _parse_trace_csv(trace)
                targets.append((_parse_summary(summary), rows, str(trace)))
        elif path.is_file():
            metadata, rows = _parse_trace_csv(path)
            if "algo" not in metadata:
                print(f"error: {path} has no embedded replay metadata", file=sys.stderr)
                return EXIT_USAGE
            targets.append((metadata, rows, str(path)))
        else:
            print(f"error: no such path {path}", file=sys.stderr)
            return EXIT_USAGE

    total_rows = 0
    all_problems: list[str] = []
    for metadata, rows, source in targets:
        total_rows += len(rows)
        all_problems.extend(_verify_one(metadata, rows, source))
    if all_problems:
        for problem in all_problems:
            print(f"VIOLATION: {problem}", file=sys.stderr)
        print(f"verify: {len(all_problems)} violation(s) across {total_rows} rows", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    print(f"verify: {len(targets)} trace(s), {total_rows} rows, all accepted steps re-verified")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
