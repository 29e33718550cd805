"""Desk-scale emulator of a coupled-laser analog linear-system solver.

The package is organised around a small set of layers:

``sparse``
    CSR matrix container with deterministic index-order arithmetic.
``matrixmarket``
    Matrix Market coordinate reader/writer.
``encoding``
    Maps a linear system Ax = b onto laser coupling strengths and back.
``dynamics``
    Integrates the coupled-laser equations to steady state.
``krylov``
    Native iterative baselines (CG, GMRES(m), BiCGSTAB, Richardson).
``collection``
    Downloader and local cache for a public sparse-matrix collection.
``bench``
    Repeated-run benchmark harness with percentile summaries and reports.
``cli``
    Command-line front end.
"""

from lasersolve.errors import (
    LaserSolveError,
    MatrixFormatError,
    EncodingError,
    DynamicsError,
    RestartBudgetError,
    SolverError,
    CollectionError,
    MatrixNotFoundError,
    AmbiguousNameError,
    NetworkError,
    ChecksumError,
    BenchmarkError,
)
from lasersolve.sparse import (
    SparseMatrix,
    spmv,
    transpose,
    relative_residual,
    random_rhs,
)
from lasersolve.matrixmarket import (
    MatrixMetadata,
    parse_matrix_market,
    write_matrix_market,
)
from lasersolve.encoding import (
    EncodingConfig,
    LpuProblem,
    reference_couplings,
    encode,
    decode,
    shrink_scale,
)
from lasersolve.dynamics import (
    CavityParams,
    LaserState,
    RunResult,
    DynamicsMode,
    gain_loss,
    stationary_gain,
    gain_derivative,
    field_derivative,
    phase_derivative,
    linearized_phase_derivative,
    cavity_derivative,
    initial_state,
    step,
    run,
    write_trace_csv,
)
from lasersolve.krylov import SolverSpec, SolveOutcome, solve, richardson
from lasersolve.collection import (
    MatrixRef,
    CollectionIndex,
    CacheEntry,
    default_cache_dir,
    load_index,
    resolve,
    fetch,
)
from lasersolve.bench import (
    LpuSpec,
    BenchmarkPlan,
    RunRecord,
    SummaryStats,
    load_plan,
    run_plan,
    summarize,
    collect_stats,
    emit_report,
    emit_chart_data,
    render_chart_svg,
)

__version__ = "0.1.0"

__all__ = [
    "LaserSolveError",
    "MatrixFormatError",
    "EncodingError",
    "DynamicsError",
    "RestartBudgetError",
    "SolverError",
    "CollectionError",
    "MatrixNotFoundError",
    "AmbiguousNameError",
    "NetworkError",
    "ChecksumError",
    "BenchmarkError",
    "SparseMatrix",
    "spmv",
    "transpose",
    "relative_residual",
    "random_rhs",
    "MatrixMetadata",
    "parse_matrix_market",
    "write_matrix_market",
    "EncodingConfig",
    "LpuProblem",
    "reference_couplings",
    "encode",
    "decode",
    "shrink_scale",
    "CavityParams",
    "LaserState",
    "RunResult",
    "DynamicsMode",
    "gain_loss",
    "stationary_gain",
    "gain_derivative",
    "field_derivative",
    "phase_derivative",
    "linearized_phase_derivative",
    "cavity_derivative",
    "initial_state",
    "step",
    "run",
    "write_trace_csv",
    "SolverSpec",
    "SolveOutcome",
    "solve",
    "richardson",
    "MatrixRef",
    "CollectionIndex",
    "CacheEntry",
    "default_cache_dir",
    "load_index",
    "resolve",
    "fetch",
    "LpuSpec",
    "BenchmarkPlan",
    "RunRecord",
    "SummaryStats",
    "load_plan",
    "run_plan",
    "summarize",
    "collect_stats",
    "emit_report",
    "emit_chart_data",
    "render_chart_svg",
    "__version__",
]
