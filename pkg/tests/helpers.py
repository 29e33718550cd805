"""Shared oracles, generators, and a local HTTP server for the tests.

Every oracle here is coded independently of the package internals
(plain Python loops, numpy.linalg, textbook formulas) so tests compare
two separately derived answers.
"""

from __future__ import annotations

import collections
import io
import math
import tarfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from lasersolve.sparse import SparseMatrix


# --- linear-algebra oracles ---------------------------------------------

def csr_matvec_oracle(A: SparseMatrix, x):
    """Pure-Python CSR matvec, summing strictly left to right."""
    out = np.zeros(A.nrows, dtype=np.result_type(A.values.dtype, np.asarray(x).dtype))
    for i in range(A.nrows):
        s = out[i]
        for k in range(A.row_starts[i], A.row_starts[i + 1]):
            s = s + A.values[k] * x[A.col_indices[k]]
        out[i] = s
    return out


def lu_solve(dense, b):
    return np.linalg.solve(np.asarray(dense, dtype=np.float64), b)


def rel_err(x, x_ref):
    x_ref = np.asarray(x_ref, dtype=np.float64)
    return float(np.linalg.norm(x - x_ref) / np.linalg.norm(x_ref))


def percentile_type7(values, p):
    """Linear interpolation between closest ranks, inclusive."""
    s = sorted(float(v) for v in values)
    if not s:
        raise ValueError("empty sample")
    h = (len(s) - 1) * (p / 100.0)
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


# --- matrix generators --------------------------------------------------

def diag_dominant_spd(n, seed, density=0.35, dominance=1.5):
    """Symmetric, strictly diagonally dominant, positive diagonal."""
    rng = np.random.default_rng(seed)
    M = rng.uniform(-1.0, 1.0, size=(n, n))
    M = np.where(rng.random((n, n)) < density, M, 0.0)
    M = (M + M.T) / 2.0
    np.fill_diagonal(M, 0.0)
    d = 1.0 + dominance * np.abs(M).sum(axis=1)
    np.fill_diagonal(M, d)
    return M


def well_conditioned_general(n, seed, offdiag=0.5):
    """Nonsymmetric, eigenvalues clustered near the diagonal value."""
    rng = np.random.default_rng(seed)
    M = offdiag * rng.standard_normal((n, n)) / math.sqrt(n)
    M[np.diag_indices(n)] += 3.0
    return M


def banded_spd_dense(n, diag=3.5, near=-1.0, far=-0.5):
    """Pentadiagonal SPD: bandwidth five, strictly dominant diagonal."""
    M = np.zeros((n, n))
    idx = np.arange(n)
    M[idx, idx] = diag
    M[idx[:-1], idx[1:]] = near
    M[idx[1:], idx[:-1]] = near
    M[idx[:-2], idx[2:]] = far
    M[idx[2:], idx[:-2]] = far
    return M


def random_sparse_dense(n, seed, density=0.25, ensure_nonzero=True):
    rng = np.random.default_rng(seed)
    M = rng.uniform(-2.0, 2.0, size=(n, n))
    M = np.where(rng.random((n, n)) < density, M, 0.0)
    if ensure_nonzero and not np.any(M):
        M[rng.integers(n), rng.integers(n)] = float(rng.uniform(0.5, 2.0))
    return M


# --- Matrix Market text builders ----------------------------------------

def mm_text(entries, nrows, ncols, field="real", symmetry="general",
            header_extras=(), declared=None):
    """Build a coordinate-format document from (i, j, v) 1-based triplets."""
    lines = [f"%%MatrixMarket matrix coordinate {field} {symmetry}"]
    lines.extend(header_extras)
    count = len(entries) if declared is None else declared
    lines.append(f"{nrows} {ncols} {count}")
    for i, j, v in entries:
        lines.append(f"{i} {j} {v}")
    return "\n".join(lines) + "\n"


# --- RunResult protocol check -------------------------------------------

def check_run_result(result, params=None):
    """Device time must always be the roundtrip model, never wall clock."""
    per = params.roundtrip_ns if params is not None else 20
    assert result.time_ns == result.roundtrips * per
    assert result.roundtrips >= 1
    assert len(result.residual_trace) == len(result.max_phase_trace)
    assert result.residual_trace[-1][1] == result.final_residual


# --- local collection server --------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    def do_GET(self):
        self.server.counts[self.path] += 1
        body = self.server.routes.get(self.path)
        if body is None:
            self.send_error(404, "not found")
            return
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


class CollectionServer:
    """Threaded HTTP server exposing routes from a plain dict."""

    def __init__(self):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.httpd.routes = {}
        self.httpd.counts = collections.Counter()
        self._thread = threading.Thread(
            target=self.httpd.serve_forever, daemon=True
        )
        self._thread.start()

    @property
    def base_url(self):
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    @property
    def routes(self):
        return self.httpd.routes

    @property
    def counts(self):
        return self.httpd.counts

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        self._thread.join(timeout=5)


def index_csv(rows):
    """Collection index text: two preamble lines, then CSV rows."""
    lines = [str(len(rows)), "2026-01-01"]
    for group, name, nrows, ncols, nnz in rows:
        lines.append(
            f"{group},{name},{nrows},{ncols},{nnz},0,0,1,1,1,0,unknown"
        )
    return "\n".join(lines) + "\n"


def make_archive(name, mtx_text, member=None):
    """In-memory tar.gz holding one Matrix Market member."""
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz") as tar:
        data = mtx_text.encode("ascii")
        info = tarfile.TarInfo(member or f"{name}/{name}.mtx")
        info.size = len(data)
        tar.addfile(info, io.BytesIO(data))
    return buf.getvalue()
