"""Matrix Market coordinate-format reader and writer.

Supported variant: ``matrix coordinate`` with field ``real`` or
``integer`` and symmetry ``general`` or ``symmetric``, 1-based indices,
``%`` comments, optionally gzip-compressed.  Everything else raises
``MatrixFormatError``.  Duplicate coordinates are rejected rather than
summed: the benchmark corpus is clean, and silent summing would hide
corrupt files.
"""

from __future__ import annotations

import dataclasses
import gzip
import io
import os
import warnings
from pathlib import Path

import numpy as np

from lasersolve.errors import MatrixFormatError
from lasersolve.sparse import SparseMatrix

__all__ = ["MatrixMetadata", "parse_matrix_market", "write_matrix_market"]

_GZIP_MAGIC = b"\x1f\x8b"


@dataclasses.dataclass(frozen=True)
class MatrixMetadata:
    """Provenance of a parsed matrix.

    ``declared_nnz`` counts stored entries after symmetric expansion,
    matching ``SparseMatrix.nnz`` of the returned matrix.
    """

    name: str
    symmetry: str
    declared_nnz: int
    source: str


def _strip_mm_suffixes(filename: str) -> str:
    name = filename
    for suffix in (".gz", ".mtx"):
        if name.lower().endswith(suffix):
            name = name[: -len(suffix)]
    return name


def _open_text(source):
    """Normalize path / bytes / binary stream into a text reader."""
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        raw = path.open("rb")
        name = _strip_mm_suffixes(path.name)
        origin = str(path)
    elif isinstance(source, (bytes, bytearray)):
        raw = io.BytesIO(bytes(source))
        name, origin = "", "<bytes>"
    elif hasattr(source, "read"):
        raw = source
        raw_name = getattr(source, "name", "")
        if isinstance(raw_name, str) and raw_name and not raw_name.startswith("<"):
            origin = raw_name
            name = _strip_mm_suffixes(os.path.basename(raw_name))
        else:
            origin, name = "<stream>", ""
    else:
        raise TypeError("source must be a path, bytes, or a binary stream")
    buffered = io.BufferedReader(raw) if not isinstance(
        raw, io.BufferedReader
    ) else raw
    head = buffered.peek(2)[:2]
    if head == _GZIP_MAGIC:
        buffered = gzip.GzipFile(fileobj=buffered)
    # Matrix Market files are ASCII; latin-1 never raises on stray bytes.
    return io.TextIOWrapper(buffered, encoding="latin-1"), name, origin


def _parse_header(line: str):
    tokens = line.split()
    if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
        raise MatrixFormatError(f"malformed header line: {line.strip()!r}")
    obj, fmt, field, symmetry = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise MatrixFormatError(f"unsupported object {obj!r}")
    if fmt != "coordinate":
        raise MatrixFormatError(f"unsupported format {fmt!r}")
    if field not in ("real", "integer"):
        raise MatrixFormatError(f"unsupported field {field!r}")
    if symmetry not in ("general", "symmetric"):
        raise MatrixFormatError(f"unsupported symmetry {symmetry!r}")
    return field, symmetry


def _read_size_line(text_stream):
    for line in text_stream:
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise MatrixFormatError(f"malformed size line: {stripped!r}")
        try:
            nrows, ncols, entries = (int(p) for p in parts)
        except ValueError as exc:
            raise MatrixFormatError(
                f"malformed size line: {stripped!r}"
            ) from exc
        if nrows < 0 or ncols < 0 or entries < 0:
            raise MatrixFormatError("size line entries must be nonnegative")
        return nrows, ncols, entries
    raise MatrixFormatError("missing size line")


def _check_indices(raw_col, upper, what):
    if not np.all(raw_col == np.floor(raw_col)):
        raise MatrixFormatError(f"non-integer {what} index")
    idx = raw_col.astype(np.int64)
    if idx.size and (idx.min() < 1 or idx.max() > upper):
        raise MatrixFormatError(
            f"{what} index out of declared bounds [1, {upper}]"
        )
    return idx - 1


def parse_matrix_market(source) -> tuple[SparseMatrix, MatrixMetadata]:
    """Parse a Matrix Market coordinate file into CSR form.

    ``source`` may be a filesystem path, raw bytes, or a binary stream.
    Symmetric files are expanded to full storage by mirroring every
    off-diagonal entry.
    """
    text, name, origin = _open_text(source)
    header = text.readline()
    if not header:
        raise MatrixFormatError("empty input")
    field, symmetry = _parse_header(header)
    nrows, ncols, entries = _read_size_line(text)
    if symmetry == "symmetric" and nrows != ncols:
        raise MatrixFormatError("symmetric matrix must be square")

    if entries:
        try:
            with warnings.catch_warnings():
                # loadtxt warns on a truncated file; the count check
                # below turns that case into a format error.
                warnings.simplefilter("ignore")
                data = np.loadtxt(
                    text, dtype=np.float64, comments="%", ndmin=2
                )
        except ValueError as exc:
            raise MatrixFormatError(f"malformed entry line: {exc}") from exc
        if data.size == 0:
            raise MatrixFormatError(
                f"entry count mismatch: size line declares {entries}, "
                f"file contains 0"
            )
        if data.shape[1] != 3:
            raise MatrixFormatError(
                f"entry lines must have 3 fields, found {data.shape[1]}"
            )
        if data.shape[0] != entries:
            raise MatrixFormatError(
                f"entry count mismatch: size line declares {entries}, "
                f"file contains {data.shape[0]}"
            )
        rows = _check_indices(data[:, 0], nrows, "row")
        cols = _check_indices(data[:, 1], ncols, "column")
        vals = np.ascontiguousarray(data[:, 2])
        if not np.all(np.isfinite(vals)):
            raise MatrixFormatError("non-finite matrix value")
        if field == "integer" and not np.all(vals == np.floor(vals)):
            raise MatrixFormatError("non-integer value in integer field")
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size > 1:
        dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
        if np.any(dup):
            k = int(np.argmax(dup))
            raise MatrixFormatError(
                f"duplicate entry at row {rows[k] + 1}, column {cols[k] + 1}"
            )

    if symmetry == "symmetric":
        if np.any(rows < cols):
            raise MatrixFormatError(
                "symmetric file lists an upper-triangle entry"
            )
        off = rows != cols
        lower_rows, lower_cols = rows, cols
        rows = np.concatenate([lower_rows, lower_cols[off]])
        cols = np.concatenate([lower_cols, lower_rows[off]])
        vals = np.concatenate([vals, vals[off]])

    try:
        matrix = SparseMatrix.from_coo(nrows, ncols, rows, cols, vals)
    except ValueError as exc:
        raise MatrixFormatError(str(exc)) from exc
    meta = MatrixMetadata(
        name=name, symmetry=symmetry, declared_nnz=matrix.nnz, source=origin
    )
    return matrix, meta


def write_matrix_market(A: SparseMatrix, target, comment: str | None = None):
    """Write CSR as a ``general real`` coordinate file.

    Entries are emitted in storage order with %.17g precision, so
    parse -> write -> parse reproduces the CSR arrays exactly.
    ``target`` is a path or a text-mode stream.
    """
    own = isinstance(target, (str, os.PathLike))
    fh = open(target, "w", encoding="ascii") if own else target
    try:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.nrows} {A.ncols} {A.nnz}\n")
        rows = A.row_of_entry() + 1
        cols = A.col_indices + 1
        for i, j, v in zip(rows, cols, A.values):
            fh.write(f"{i} {j} {v:.17g}\n")
    finally:
        if own:
            fh.close()
