"""Benchmark harness: repeated timed solves with percentile summaries.

Protocol per (problem, solver) pair: ``runs_per_pair`` repetitions
(default ten), every solver starting from a zero iterate on the same
random right-hand side (one per problem, seeded by
``rhs_seed_base + problem_index``).  Digital solver times are wall
clock around the iteration loop; emulator times are the roundtrip
model (roundtrips times 20 ns) and never wall clock.  Summaries are
median / 25th / 75th percentiles over converged runs only, using
type-7 linear interpolation between closest ranks.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import io
import json
import os
from pathlib import Path

import numpy as np

from lasersolve import collection
from lasersolve.dynamics import CavityParams, DynamicsMode, run
from lasersolve.encoding import EncodingConfig, encode
from lasersolve.errors import BenchmarkError, LaserSolveError
from lasersolve.krylov import SolverSpec, solve
from lasersolve.matrixmarket import parse_matrix_market
from lasersolve.sparse import random_rhs

__all__ = [
    "LpuSpec",
    "BenchmarkPlan",
    "RunRecord",
    "SummaryStats",
    "run_plan",
    "summarize",
    "collect_stats",
    "emit_report",
    "emit_chart_data",
    "render_chart_svg",
    "plan_to_dict",
    "plan_from_dict",
    "load_plan",
    "REPORT_SCHEMA_VERSION",
    "REPORT_SCHEMA",
]

REPORT_SCHEMA_VERSION = "1"

PERCENTILE_CONVENTION = (
    "median and quartiles by type-7 linear interpolation between closest "
    "ranks (inclusive); median of an even count is the mean of the two "
    "middle order statistics"
)

TIME_SEMANTICS = {
    "wall_clock": (
        "digital apply time: monotonic clock around the iteration loop "
        "only, in nanoseconds"
    ),
    "roundtrip_model": (
        "emulator time: cavity roundtrips times roundtrip_ns, never "
        "wall clock"
    ),
}


@dataclasses.dataclass(frozen=True)
class LpuSpec:
    """Emulator configuration used as a benchmark 'solver'."""

    encoding: EncodingConfig = EncodingConfig()
    cavity: CavityParams = CavityParams()
    mode: DynamicsMode = DynamicsMode.PhaseOnly
    integrator: str = "euler"
    check_every: int = 100
    max_roundtrips: int = 100_000
    max_restarts: int = 10
    label: str | None = None

    def __post_init__(self):
        if self.mode is DynamicsMode.GenericCavity:
            raise ValueError("benchmarks need an encoded-system mode")

    @property
    def display_label(self) -> str:
        return self.label or f"LPU-{self.mode.name}"


@dataclasses.dataclass(frozen=True)
class BenchmarkPlan:
    """What to run: problems x solvers x repetitions.

    Problems are local Matrix Market paths or collection references;
    solvers are ``SolverSpec`` or ``LpuSpec`` entries.  ``tol`` applies
    uniformly to every solver in the plan.  With ``rhs_per_run`` each
    repetition draws its own b (seed
    ``rhs_seed_base + 100000 * problem_index + run_index``) instead of
    sharing one per problem.
    """

    problems: tuple
    solvers: tuple
    runs_per_pair: int = 10
    tol: float = 1e-5
    rhs_seed_base: int = 0
    rhs_per_run: bool = False
    cache_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "problems", tuple(self.problems))
        object.__setattr__(self, "solvers", tuple(self.solvers))
        if self.runs_per_pair < 1:
            raise ValueError("runs_per_pair must be at least 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        for s in self.solvers:
            if not isinstance(s, (SolverSpec, LpuSpec)):
                raise ValueError(f"unsupported solver entry: {s!r}")


@dataclasses.dataclass(frozen=True)
class RunRecord:
    """One timed run (or one recorded failure)."""

    problem: str
    solver: str
    run_index: int
    time_ns: int
    converged: bool
    residual: float
    iterations_or_roundtrips: int
    time_kind: str = "wall_clock"
    error: str | None = None


@dataclasses.dataclass(frozen=True)
class SummaryStats:
    """Median and quartiles of converged solve times."""

    median_ns: float
    p25_ns: float
    p75_ns: float
    n_converged: int

    def __post_init__(self):
        if not (self.p25_ns <= self.median_ns <= self.p75_ns):
            raise ValueError("quartiles must bracket the median")


def _problem_label(entry) -> str:
    if isinstance(entry, collection.MatrixRef):
        return entry.name
    name = os.path.basename(str(entry))
    for suffix in (".gz", ".mtx"):
        if name.lower().endswith(suffix):
            name = name[: -len(suffix)]
    return name


def _load_problem(entry, plan: BenchmarkPlan):
    if isinstance(entry, collection.MatrixRef):
        cache_dir = plan.cache_dir
        ref = entry
        if ref.group is None:
            index = collection.load_index(cache_dir)
            ref = collection.resolve(ref.name, index)
        cached = collection.fetch(ref, cache_dir)
        matrix, _ = parse_matrix_market(cached.local_path)
        return matrix
    matrix, _ = parse_matrix_market(entry)
    return matrix


def _failure_record(label, solver_label, run_index, exc) -> RunRecord:
    return RunRecord(
        problem=label,
        solver=solver_label,
        run_index=run_index,
        time_ns=0,
        converged=False,
        residual=float("nan"),
        iterations_or_roundtrips=0,
        time_kind="none",
        error=str(exc) or exc.__class__.__name__,
    )


def run_plan(plan: BenchmarkPlan) -> list:
    """Execute the whole plan; failures become records, never aborts."""
    records = []
    for p_index, entry in enumerate(plan.problems):
        label = _problem_label(entry)
        try:
            A = _load_problem(entry, plan)
        except (LaserSolveError, OSError) as exc:
            records.append(_failure_record(label, "(load)", 0, exc))
            continue
        shared_b = random_rhs(A.nrows, plan.rhs_seed_base + p_index)
        for solver in plan.solvers:
            solver_label = solver.display_label
            for r_index in range(plan.runs_per_pair):
                if plan.rhs_per_run:
                    b = random_rhs(
                        A.nrows,
                        plan.rhs_seed_base + 100_000 * p_index + r_index,
                    )
                else:
                    b = shared_b
                try:
                    records.append(
                        _single_run(A, b, solver, solver_label, label,
                                    r_index, plan.tol)
                    )
                except LaserSolveError as exc:
                    records.append(
                        _failure_record(label, solver_label, r_index, exc)
                    )
    return records


def _single_run(A, b, solver, solver_label, problem_label, run_index,
                tol) -> RunRecord:
    if isinstance(solver, SolverSpec):
        outcome = solve(A, b, dataclasses.replace(solver, tol=tol))
        return RunRecord(
            problem=problem_label,
            solver=solver_label,
            run_index=run_index,
            time_ns=int(outcome.apply_time_ns),
            converged=outcome.converged,
            residual=outcome.final_residual,
            iterations_or_roundtrips=outcome.iterations,
            time_kind="wall_clock",
        )
    problem = encode(A, b, solver.encoding)
    result = run(
        problem,
        A,
        b,
        solver.cavity,
        solver.mode,
        tol=tol,
        check_every=solver.check_every,
        max_roundtrips=solver.max_roundtrips,
        integrator=solver.integrator,
        theta_max=solver.encoding.theta_max,
        max_restarts=solver.max_restarts,
    )
    return RunRecord(
        problem=problem_label,
        solver=solver_label,
        run_index=run_index,
        time_ns=int(result.time_ns),
        converged=result.converged,
        residual=result.final_residual,
        iterations_or_roundtrips=result.roundtrips,
        time_kind="roundtrip_model",
    )


def summarize(times) -> SummaryStats:
    """Type-7 median and quartiles of a non-empty duration list."""
    arr = np.asarray(list(times), dtype=np.float64)
    if arr.size == 0:
        raise BenchmarkError("cannot summarize an empty list of times")
    p25, median, p75 = np.percentile(arr, [25.0, 50.0, 75.0])
    return SummaryStats(
        median_ns=float(median),
        p25_ns=float(p25),
        p75_ns=float(p75),
        n_converged=int(arr.size),
    )


def collect_stats(records) -> list:
    """Per (problem, solver) summaries in first-appearance order.

    Returns (problem, solver, stats_or_None, n_runs) tuples; pairs with
    zero converged runs carry ``None`` stats.  Failure records from
    problem loading (solver "(load)") are excluded.
    """
    order = []
    times = {}
    totals = {}
    for rec in records:
        if rec.solver == "(load)":
            continue
        key = (rec.problem, rec.solver)
        if key not in times:
            order.append(key)
            times[key] = []
            totals[key] = 0
        totals[key] += 1
        if rec.converged:
            times[key].append(rec.time_ns)
    out = []
    for key in order:
        stats = summarize(times[key]) if times[key] else None
        out.append((key[0], key[1], stats, totals[key]))
    return out


# --- serialization -------------------------------------------------------

def _encoding_to_dict(cfg: EncodingConfig) -> dict:
    return dataclasses.asdict(cfg)


def _cavity_to_dict(params: CavityParams) -> dict:
    return dataclasses.asdict(params)


def solver_to_dict(solver) -> dict:
    if isinstance(solver, SolverSpec):
        d = dataclasses.asdict(solver)
        d["type"] = "digital"
        return d
    return {
        "type": "lpu",
        "encoding": _encoding_to_dict(solver.encoding),
        "cavity": _cavity_to_dict(solver.cavity),
        "mode": solver.mode.name,
        "integrator": solver.integrator,
        "check_every": solver.check_every,
        "max_roundtrips": solver.max_roundtrips,
        "max_restarts": solver.max_restarts,
        "label": solver.label,
    }


def solver_from_dict(d: dict):
    kind = d.get("type")
    if kind == "digital":
        fields = {k: v for k, v in d.items() if k != "type"}
        return SolverSpec(**fields)
    if kind == "lpu":
        return LpuSpec(
            encoding=EncodingConfig(**d.get("encoding", {})),
            cavity=CavityParams(**d.get("cavity", {})),
            mode=DynamicsMode[d.get("mode", "PhaseOnly")],
            integrator=d.get("integrator", "euler"),
            check_every=d.get("check_every", 100),
            max_roundtrips=d.get("max_roundtrips", 100_000),
            max_restarts=d.get("max_restarts", 10),
            label=d.get("label"),
        )
    raise BenchmarkError(f"unknown solver type {kind!r} in plan")


def _problem_to_jsonable(entry):
    if isinstance(entry, collection.MatrixRef):
        return {"name": entry.name, "group": entry.group}
    return str(entry)


def _problem_from_jsonable(entry):
    if isinstance(entry, dict):
        return collection.MatrixRef(
            name=entry["name"], group=entry.get("group")
        )
    return str(entry)


def plan_to_dict(plan: BenchmarkPlan) -> dict:
    return {
        "problems": [_problem_to_jsonable(p) for p in plan.problems],
        "solvers": [solver_to_dict(s) for s in plan.solvers],
        "runs_per_pair": plan.runs_per_pair,
        "tol": plan.tol,
        "rhs_seed_base": plan.rhs_seed_base,
        "rhs_per_run": plan.rhs_per_run,
        "cache_dir": plan.cache_dir,
    }


def plan_from_dict(d: dict) -> BenchmarkPlan:
    try:
        return BenchmarkPlan(
            problems=tuple(
                _problem_from_jsonable(p) for p in d.get("problems", ())
            ),
            solvers=tuple(solver_from_dict(s) for s in d.get("solvers", ())),
            runs_per_pair=d.get("runs_per_pair", 10),
            tol=d.get("tol", 1e-5),
            rhs_seed_base=d.get("rhs_seed_base", 0),
            rhs_per_run=d.get("rhs_per_run", False),
            cache_dir=d.get("cache_dir"),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise BenchmarkError(f"invalid benchmark plan: {exc}") from exc


def load_plan(path) -> BenchmarkPlan:
    """Read a plan from a JSON file (TOML too on Python 3.11+)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError as exc:
            raise BenchmarkError(
                "TOML plans need Python 3.11+; use JSON instead"
            ) from exc
        data = tomllib.loads(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BenchmarkError(f"plan is not valid JSON: {exc}") from exc
    return plan_from_dict(data)


def record_to_dict(rec: RunRecord) -> dict:
    d = dataclasses.asdict(rec)
    if isinstance(rec.residual, float) and np.isnan(rec.residual):
        d["residual"] = None
    return d


def record_from_dict(d: dict) -> RunRecord:
    d = dict(d)
    if d.get("residual") is None:
        d["residual"] = float("nan")
    return RunRecord(**d)


def _summary_entry(problem, solver, stats, n_runs) -> dict:
    entry = {
        "problem": problem,
        "solver": solver,
        "n_runs": n_runs,
        "n_converged": stats.n_converged if stats else 0,
        "median_ns": stats.median_ns if stats else None,
        "p25_ns": stats.p25_ns if stats else None,
        "p75_ns": stats.p75_ns if stats else None,
    }
    return entry


def emit_report(records, stats, format: str = "json", *, plan=None,
                path=None) -> str:
    """Render records plus summaries as a JSON or CSV document.

    JSON reports embed the full plan (every encoding and cavity
    default, seeds, tolerances) so the measurement can be re-run
    exactly.  ``path``, when given, also writes the document there.
    """
    if not records:
        raise BenchmarkError("cannot emit a report without records")
    fmt = format.lower()
    if fmt == "json":
        doc = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "created": datetime.datetime.now(datetime.timezone.utc)
            .isoformat(timespec="seconds"),
            "percentile_convention": PERCENTILE_CONVENTION,
            "time_semantics": dict(TIME_SEMANTICS),
            "plan": plan_to_dict(plan) if plan is not None else None,
            "records": [record_to_dict(r) for r in records],
            "summaries": [_summary_entry(*row) for row in stats],
        }
        text = json.dumps(doc, indent=2)
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow([
            "problem", "solver", "run_index", "time_ns", "converged",
            "residual", "iterations_or_roundtrips", "time_kind", "error",
        ])
        for r in records:
            writer.writerow([
                r.problem, r.solver, r.run_index, r.time_ns,
                int(r.converged), repr(r.residual),
                r.iterations_or_roundtrips, r.time_kind, r.error or "",
            ])
        text = buf.getvalue()
    else:
        raise ValueError("format must be 'json' or 'csv'")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def emit_chart_data(stats, *, path=None) -> str:
    """Grouped-bar data: per problem, one bar per solver with the
    median and the [p25, p75] range, in plan order."""
    if not stats:
        raise BenchmarkError("no summarized pairs to chart")
    problems = []
    by_problem = {}
    for problem, solver, st, _n in stats:
        if problem not in by_problem:
            by_problem[problem] = []
            problems.append(problem)
        if st is None:
            continue
        by_problem[problem].append({
            "solver": solver,
            "median_ns": st.median_ns,
            "p25_ns": st.p25_ns,
            "p75_ns": st.p75_ns,
        })
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "problems": [
            {"problem": p, "bars": by_problem[p]} for p in problems
        ],
    }
    text = json.dumps(doc, indent=2)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


_SVG_COLORS = ("#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4",
               "#8c613c")


def _format_ns(value: float) -> str:
    for unit, scale in (("s", 1e9), ("ms", 1e6), ("us", 1e3)):
        if value >= scale:
            return f"{value / scale:.3g} {unit}"
    return f"{value:.3g} ns"


def render_chart_svg(chart_data, *, path=None) -> str:
    """Static grouped bar chart with p25..p75 whiskers."""
    if isinstance(chart_data, str):
        chart_data = json.loads(chart_data)
    groups = chart_data["problems"]
    bar_w, gap, group_gap = 46, 10, 40
    margin_l, margin_r, margin_t, margin_b = 80, 20, 30, 60
    plot_h = 300
    n_bars = sum(len(g["bars"]) for g in groups)
    width = (margin_l + margin_r + n_bars * (bar_w + gap)
             + len(groups) * group_gap)
    height = margin_t + plot_h + margin_b
    peak = max(
        (bar["p75_ns"] for g in groups for bar in g["bars"]), default=1.0
    )
    peak = peak if peak > 0 else 1.0
    scale = plot_h / (1.1 * peak)

    def y_of(v):
        return margin_t + plot_h - v * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i in range(5):
        v = 1.1 * peak * i / 4
        y = y_of(v)
        parts.append(
            f'<line x1="{margin_l}" y1="{y:.1f}" x2="{width - margin_r}" '
            f'y2="{y:.1f}" stroke="#ddd"/>'
        )
        parts.append(
            f'<text x="{margin_l - 6}" y="{y + 4:.1f}" text-anchor="end">'
            f"{_format_ns(v)}</text>"
        )
    x = margin_l + group_gap / 2
    for g in groups:
        group_start = x
        for j, bar in enumerate(g["bars"]):
            color = _SVG_COLORS[j % len(_SVG_COLORS)]
            top = y_of(bar["median_ns"])
            parts.append(
                f'<rect x="{x:.1f}" y="{top:.1f}" width="{bar_w}" '
                f'height="{margin_t + plot_h - top:.1f}" fill="{color}"/>'
            )
            cx = x + bar_w / 2
            y25, y75 = y_of(bar["p25_ns"]), y_of(bar["p75_ns"])
            parts.append(
                f'<line x1="{cx:.1f}" y1="{y25:.1f}" x2="{cx:.1f}" '
                f'y2="{y75:.1f}" stroke="black" stroke-width="2"/>'
            )
            for yy in (y25, y75):
                parts.append(
                    f'<line x1="{cx - 6:.1f}" y1="{yy:.1f}" '
                    f'x2="{cx + 6:.1f}" y2="{yy:.1f}" stroke="black" '
                    'stroke-width="2"/>'
                )
            parts.append(
                f'<text x="{cx:.1f}" y="{margin_t + plot_h + 16}" '
                f'text-anchor="middle">{bar["solver"]}</text>'
            )
            x += bar_w + gap
        center = (group_start + x - gap) / 2
        parts.append(
            f'<text x="{center:.1f}" y="{margin_t + plot_h + 36}" '
            f'text-anchor="middle" font-weight="bold">{g["problem"]}</text>'
        )
        x += group_gap
    parts.append("</svg>")
    text = "\n".join(parts)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": [
        "schema_version", "created", "percentile_convention",
        "time_semantics", "plan", "records", "summaries",
    ],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "created": {"type": "string"},
        "percentile_convention": {"type": "string"},
        "time_semantics": {
            "type": "object",
            "required": ["wall_clock", "roundtrip_model"],
        },
        "plan": {
            "type": ["object", "null"],
            "properties": {
                "problems": {"type": "array"},
                "solvers": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["type"],
                        "properties": {
                            "type": {"enum": ["digital", "lpu"]},
                        },
                    },
                },
                "runs_per_pair": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "rhs_seed_base": {"type": "integer"},
                "rhs_per_run": {"type": "boolean"},
            },
            "required": [
                "problems", "solvers", "runs_per_pair", "tol",
                "rhs_seed_base", "rhs_per_run",
            ],
        },
        "records": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": [
                    "problem", "solver", "run_index", "time_ns",
                    "converged", "residual", "iterations_or_roundtrips",
                    "time_kind",
                ],
                "properties": {
                    "problem": {"type": "string"},
                    "solver": {"type": "string"},
                    "run_index": {"type": "integer", "minimum": 0},
                    "time_ns": {"type": "integer", "minimum": 0},
                    "converged": {"type": "boolean"},
                    "residual": {"type": ["number", "null"]},
                    "iterations_or_roundtrips": {
                        "type": "integer", "minimum": 0,
                    },
                    "time_kind": {
                        "enum": ["wall_clock", "roundtrip_model", "none"],
                    },
                    "error": {"type": ["string", "null"]},
                },
            },
        },
        "summaries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "problem", "solver", "n_runs", "n_converged",
                    "median_ns", "p25_ns", "p75_ns",
                ],
                "properties": {
                    "problem": {"type": "string"},
                    "solver": {"type": "string"},
                    "n_runs": {"type": "integer", "minimum": 1},
                    "n_converged": {"type": "integer", "minimum": 0},
                    "median_ns": {"type": ["number", "null"]},
                    "p25_ns": {"type": ["number", "null"]},
                    "p75_ns": {"type": ["number", "null"]},
                },
            },
        },
    },
}
