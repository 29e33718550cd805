"""Command-line front end.

Subcommands: ``solve`` (digital solver on a matrix file), ``emulate``
(laser emulator on a matrix file), ``bench`` (execute a plan file),
``fetch`` (download a collection matrix), ``info`` (print matrix
stats).  Exit codes: 0 success, 2 bad arguments, 3 matrix parse error,
4 non-convergence or diverging dynamics, 5 network failure, 1 other
failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from lasersolve import bench as bench_mod
from lasersolve import collection
from lasersolve.dynamics import (
    CavityParams,
    DynamicsMode,
    run,
    write_trace_csv,
)
from lasersolve.encoding import EncodingConfig, encode
from lasersolve.errors import (
    BenchmarkError,
    CollectionError,
    DynamicsError,
    LaserSolveError,
    MatrixFormatError,
    NetworkError,
)
from lasersolve.krylov import SolverSpec, solve
from lasersolve.matrixmarket import parse_matrix_market
from lasersolve.sparse import random_rhs

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NO_CONVERGENCE = 4
EXIT_NETWORK = 5

_MODES = {"phase": DynamicsMode.PhaseOnly, "full": DynamicsMode.FullField}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lasersolve",
        description=(
            "Solve sparse linear systems with native iterative solvers or "
            "an emulated coupled-laser analog solver, benchmark them, and "
            "manage a matrix-collection cache."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p_solve = sub.add_parser(
        "solve", help="run one digital solver on a matrix file",
        formatter_class=fmt,
    )
    p_solve.add_argument("--matrix", required=True,
                         help="Matrix Market file (optionally .gz)")
    p_solve.add_argument("--solver", default="cg",
                         choices=["cg", "gmres", "bicgstab", "richardson"],
                         help="iterative method")
    p_solve.add_argument("--tol", type=float, default=1e-5,
                         help="relative residual tolerance")
    p_solve.add_argument("--max-iterations", type=int, default=10_000,
                         help="iteration cap")
    p_solve.add_argument("--restart", type=int, default=30,
                         help="GMRES restart length")
    p_solve.add_argument("--omega", type=float, default=1.0,
                         help="Richardson relaxation factor")
    p_solve.add_argument("--rhs-seed", type=int, default=0,
                         help="seed for the random right-hand side")
    p_solve.add_argument("--out", default=None,
                         help="write outcome (including x) as JSON here")

    p_emu = sub.add_parser(
        "emulate", help="run the laser emulator on a matrix file",
        formatter_class=fmt,
    )
    p_emu.add_argument("--matrix", required=True,
                       help="Matrix Market file (optionally .gz)")
    p_emu.add_argument("--rhs-seed", type=int, default=0,
                       help="seed for the random right-hand side")
    p_emu.add_argument("--mode", default="phase", choices=sorted(_MODES),
                       help="dynamics mode: pinned-amplitude phases or "
                            "full fields with gain")
    p_emu.add_argument("--sign", default="stabilized",
                       choices=["stabilized", "as_written"],
                       help="encoding sign convention")
    p_emu.add_argument("--system-mode", default="direct",
                       choices=["direct", "normal_equations"],
                       help="encode (A, b) directly or via normal equations")
    p_emu.add_argument("--beta", type=float, default=1e-3,
                       help="initial right-hand-side scale")
    p_emu.add_argument("--theta-max", type=float, default=0.3,
                       help="phase excursion budget in radians")
    p_emu.add_argument("--tol", type=float, default=1e-5,
                       help="relative residual tolerance")
    p_emu.add_argument("--check-every", type=int, default=100,
                       help="roundtrips between residual checks")
    p_emu.add_argument("--max-roundtrips", type=int, default=100_000,
                       help="roundtrip cap")
    p_emu.add_argument("--max-restarts", type=int, default=10,
                       help="allowed scale-shrinking restarts")
    p_emu.add_argument("--integrator", default="euler",
                       choices=["euler", "rk4"], help="time stepper")
    p_emu.add_argument("--tau", type=float, default=1.0,
                       help="cavity roundtrip time unit")
    p_emu.add_argument("--tau-g", type=float, default=10.0,
                       help="gain time constant in roundtrips")
    p_emu.add_argument("--alpha", type=float, default=0.1,
                       help="roundtrip loss")
    p_emu.add_argument("--pump", type=float, default=None,
                       help="pump parameter P (default balances loss at "
                            "amplitude D)")
    p_emu.add_argument("--amplitude", type=float, default=1.0,
                       help="target steady amplitude D")
    p_emu.add_argument("--dt", type=float, default=1.0,
                       help="integrator step in roundtrips (1/dt must be "
                            "a whole number)")
    p_emu.add_argument("--trace", default=None,
                       help="write residual trace CSV here")
    p_emu.add_argument("--out", default=None,
                       help="write result (including x) as JSON here")

    p_bench = sub.add_parser(
        "bench", help="execute a benchmark plan file",
        formatter_class=fmt,
    )
    p_bench.add_argument("--plan", required=True,
                         help="plan file (JSON; TOML on Python 3.11+)")
    p_bench.add_argument("--out", default=None,
                         help="write the JSON report here")
    p_bench.add_argument("--csv", default=None,
                         help="write per-run records as CSV here")
    p_bench.add_argument("--chart", default=None,
                         help="write grouped-bar chart data JSON here")
    p_bench.add_argument("--svg", default=None,
                         help="write a static SVG bar chart here")

    p_fetch = sub.add_parser(
        "fetch", help="download a matrix from the public collection",
        formatter_class=fmt,
    )
    p_fetch.add_argument("name", help="matrix name, optionally group/name")
    p_fetch.add_argument("--cache-dir", default=None,
                         help="cache directory (default $LASERSOLVE_CACHE "
                              "or ~/.cache/lasersolve)")
    p_fetch.add_argument("--base-url", default=None,
                         help="collection base URL override")
    p_fetch.add_argument("--refresh-index", action="store_true",
                         help="re-download the collection index")
    p_fetch.add_argument("--retry", action="store_true",
                         help="discard a corrupt cache entry and re-download")

    p_info = sub.add_parser(
        "info", help="print stats of a matrix file or collection entry",
        formatter_class=fmt,
    )
    p_info.add_argument("target",
                        help="Matrix Market path, or a collection name")
    p_info.add_argument("--cache-dir", default=None,
                        help="cache directory for collection lookups")
    p_info.add_argument("--base-url", default=None,
                        help="collection base URL override")
    return parser


def _print_solution_summary(x: np.ndarray) -> None:
    head = ", ".join(f"{v:.6g}" for v in x[:6])
    ellipsis = ", ..." if x.size > 6 else ""
    print(f"x[0:{min(6, x.size)}] = [{head}{ellipsis}]")
    print(f"norm(x) = {np.linalg.norm(x):.6g}")


def _cmd_solve(args) -> int:
    A, meta = parse_matrix_market(args.matrix)
    b = random_rhs(A.nrows, args.rhs_seed)
    spec = SolverSpec(
        kind=args.solver,
        tol=args.tol,
        max_iterations=args.max_iterations,
        restart=args.restart,
        omega=args.omega,
    )
    outcome = solve(A, b, spec)
    print(f"matrix: {meta.name or args.matrix} "
          f"(n = {A.nrows:,}, nnz = {A.nnz:,})")
    print(f"solver: {spec.display_label}")
    print(f"converged: {outcome.converged} ({outcome.reason})")
    print(f"iterations: {outcome.iterations}")
    print(f"relative residual: {outcome.final_residual:.3e}")
    print(f"apply time: {outcome.apply_time_ns:,} ns")
    _print_solution_summary(outcome.x)
    if args.out:
        payload = {
            "matrix": meta.name or str(args.matrix),
            "solver": spec.display_label,
            "converged": outcome.converged,
            "reason": outcome.reason,
            "iterations": outcome.iterations,
            "relative_residual": outcome.final_residual,
            "apply_time_ns": outcome.apply_time_ns,
            "rhs_seed": args.rhs_seed,
            "x": outcome.x.tolist(),
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.out}")
    return EXIT_OK if outcome.converged else EXIT_NO_CONVERGENCE


def _cmd_emulate(args) -> int:
    A, meta = parse_matrix_market(args.matrix)
    b = random_rhs(A.nrows, args.rhs_seed)
    cfg = EncodingConfig(
        theta_max=args.theta_max,
        system_mode=args.system_mode,
        beta_init=args.beta,
        sign=args.sign,
    )
    params = CavityParams(
        tau=args.tau,
        tau_G=args.tau_g,
        alpha=args.alpha,
        D=args.amplitude,
        P=args.pump,
        dt=args.dt,
    )
    problem = encode(A, b, cfg)
    result = run(
        problem,
        A,
        b,
        params,
        _MODES[args.mode],
        tol=args.tol,
        check_every=args.check_every,
        max_roundtrips=args.max_roundtrips,
        integrator=args.integrator,
        theta_max=cfg.theta_max,
        max_restarts=args.max_restarts,
    )
    print(f"matrix: {meta.name or args.matrix} "
          f"(n = {A.nrows:,}, nnz = {A.nnz:,})")
    print(f"mode: {_MODES[args.mode].name}, sign: {cfg.sign}, "
          f"system: {cfg.system_mode}")
    print(f"converged: {result.converged}")
    print(f"roundtrips: {result.roundtrips:,} "
          f"(time = {result.time_ns:,} ns)")
    print(f"relative residual: {result.final_residual:.3e}")
    print(f"max phase: {result.max_phase_seen:.3g} rad, "
          f"restarts: {result.restarts}")
    _print_solution_summary(result.decoded_x)
    if args.trace:
        write_trace_csv(result, args.trace)
        print(f"wrote {args.trace}")
    if args.out:
        payload = {
            "matrix": meta.name or str(args.matrix),
            "mode": _MODES[args.mode].name,
            "encoding": dataclasses.asdict(cfg),
            "cavity": dataclasses.asdict(params),
            "rhs_seed": args.rhs_seed,
            "converged": result.converged,
            "roundtrips": result.roundtrips,
            "time_ns": result.time_ns,
            "relative_residual": result.final_residual,
            "max_phase_seen": result.max_phase_seen,
            "restarts": result.restarts,
            "x": result.decoded_x.tolist(),
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.out}")
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _cmd_bench(args) -> int:
    plan = bench_mod.load_plan(args.plan)
    records = bench_mod.run_plan(plan)
    if not records:
        print("plan produced no records", file=sys.stderr)
        return EXIT_USAGE
    stats = bench_mod.collect_stats(records)
    for problem, solver, st, n_runs in stats:
        if st is None:
            print(f"{problem} / {solver}: 0/{n_runs} converged")
            continue
        print(f"{problem} / {solver}: median {st.median_ns:,.0f} ns "
              f"[p25 {st.p25_ns:,.0f}, p75 {st.p75_ns:,.0f}], "
              f"{st.n_converged}/{n_runs} converged")
    if args.out:
        bench_mod.emit_report(records, stats, "json", plan=plan,
                              path=args.out)
        print(f"wrote {args.out}")
    if args.csv:
        bench_mod.emit_report(records, stats, "csv", plan=plan,
                              path=args.csv)
        print(f"wrote {args.csv}")
    chart_text = None
    if args.chart or args.svg:
        chart_text = bench_mod.emit_chart_data(stats, path=args.chart)
        if args.chart:
            print(f"wrote {args.chart}")
    if args.svg:
        bench_mod.render_chart_svg(chart_text, path=args.svg)
        print(f"wrote {args.svg}")
    return EXIT_OK


def _cmd_fetch(args) -> int:
    index = collection.load_index(
        args.cache_dir, base_url=args.base_url, refresh=args.refresh_index
    )
    ref = collection.resolve(args.name, index)
    entry = collection.fetch(
        ref, args.cache_dir, base_url=args.base_url, retry=args.retry
    )
    print(f"{ref.group}/{ref.name}")
    print(f"path: {entry.local_path}")
    print(f"sha256: {entry.checksum}")
    return EXIT_OK


def _cmd_info(args) -> int:
    import os

    if os.path.exists(args.target):
        source = args.target
        display = None
    else:
        index = collection.load_index(args.cache_dir,
                                      base_url=args.base_url)
        ref = collection.resolve(args.target, index)
        entry = collection.fetch(ref, args.cache_dir,
                                 base_url=args.base_url)
        source = entry.local_path
        display = f"{ref.group}/{ref.name}"
    A, meta = parse_matrix_market(source)
    print(f"name: {display or meta.name or args.target}")
    print(f"source: {meta.source}")
    print(f"n = {A.nrows:,} x {A.ncols:,}")
    print(f"nnz = {A.nnz:,}")
    print(f"file symmetry: {meta.symmetry}")
    return EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "emulate": _cmd_emulate,
    "bench": _cmd_bench,
    "fetch": _cmd_fetch,
    "info": _cmd_info,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors.
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except MatrixFormatError as exc:
        print(f"error: matrix parse failure: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NetworkError as exc:
        print(f"error: network failure: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except DynamicsError as exc:
        print(f"error: dynamics did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except BenchmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CollectionError as exc:
        print(f"error: collection failure: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except ValueError as exc:
        print(f"error: bad arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LaserSolveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
