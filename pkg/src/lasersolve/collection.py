"""Client for the public sparse-matrix collection.

Resolves bare matrix names to (group, name) pairs through the
collection's statistics index, downloads Matrix Market archives over
HTTPS, and keeps a content-checksummed local cache so warm-cache
operation needs no network at all.  Standard proxy environment
variables are honored by the HTTP layer.

Cache layout::

    <cache_dir>/ssstats.csv                 index snapshot
    <cache_dir>/<group>/<name>/<name>.mtx   extracted matrix
    <cache_dir>/<group>/<name>/<name>.json  checksum + source sidecar

``cache_dir`` defaults to ``$LASERSOLVE_CACHE`` or
``~/.cache/lasersolve``.  The download endpoint can be redirected with
``base_url`` arguments or ``$LASERSOLVE_BASE_URL`` (used by the tests
to point at a local server).
"""

from __future__ import annotations

import dataclasses
import datetime
import hashlib
import json
import os
import shutil
import tarfile
import tempfile
import time
from pathlib import Path

import requests

from lasersolve.errors import (
    AmbiguousNameError,
    ChecksumError,
    CollectionError,
    MatrixNotFoundError,
    NetworkError,
)
from lasersolve.matrixmarket import parse_matrix_market

__all__ = [
    "DEFAULT_BASE_URL",
    "MatrixRef",
    "IndexEntry",
    "CollectionIndex",
    "CacheEntry",
    "default_cache_dir",
    "load_index",
    "resolve",
    "fetch",
]

DEFAULT_BASE_URL = "https://sparse.tamu.edu"
INDEX_FILENAME = "ssstats.csv"
_HTTP_TIMEOUT = (15, 600)
_LOCK_TIMEOUT_S = 900.0


@dataclasses.dataclass(frozen=True)
class MatrixRef:
    """A matrix name, optionally qualified by its collection group."""

    name: str
    group: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("matrix name must be non-empty")

    @property
    def resolved(self) -> bool:
        return self.group is not None


@dataclasses.dataclass(frozen=True)
class IndexEntry:
    """One row of the collection index."""

    group: str
    name: str
    nrows: int
    ncols: int
    nnz: int


@dataclasses.dataclass(frozen=True)
class CollectionIndex:
    """Parsed index with name lookup."""

    entries: tuple

    def matches(self, name: str) -> list:
        return [e for e in self.entries if e.name == name]

    def entry(self, group: str, name: str) -> IndexEntry:
        for e in self.entries:
            if e.group == group and e.name == name:
                return e
        raise MatrixNotFoundError(f"{group}/{name} is not in the index")


@dataclasses.dataclass(frozen=True)
class CacheEntry:
    """A locally cached, checksum-verified matrix file."""

    ref: MatrixRef
    local_path: Path
    checksum: str
    fetched_at: str


def default_cache_dir() -> Path:
    env = os.environ.get("LASERSOLVE_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "lasersolve"


def _base_url(base_url: str | None) -> str:
    return (base_url or os.environ.get("LASERSOLVE_BASE_URL")
            or DEFAULT_BASE_URL).rstrip("/")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(
        timespec="seconds"
    )


def _parse_index_text(text: str) -> CollectionIndex:
    entries = []
    for line in text.splitlines():
        parts = line.strip().split(",")
        if len(parts) < 5:
            continue
        try:
            nrows, ncols, nnz = int(parts[2]), int(parts[3]), int(parts[4])
        except ValueError:
            continue
        group, name = parts[0].strip(), parts[1].strip()
        if group and name:
            entries.append(IndexEntry(group, name, nrows, ncols, nnz))
    if not entries:
        raise CollectionError("collection index has no parsable entries")
    return CollectionIndex(entries=tuple(entries))


def load_index(cache_dir=None, *, base_url: str | None = None,
               refresh: bool = False, session=None) -> CollectionIndex:
    """Return the collection index, downloading it on a cold cache.

    Network problems raise ``NetworkError``; an index that downloads
    but cannot be parsed raises ``CollectionError`` instead, so the two
    failure kinds stay distinguishable.
    """
    cache_dir = Path(cache_dir) if cache_dir else default_cache_dir()
    cache_dir.mkdir(parents=True, exist_ok=True)
    index_path = cache_dir / INDEX_FILENAME
    if refresh or not index_path.exists():
        url = f"{_base_url(base_url)}/files/{INDEX_FILENAME}"
        http = session or requests
        try:
            response = http.get(url, timeout=_HTTP_TIMEOUT)
            response.raise_for_status()
        except requests.RequestException as exc:
            raise NetworkError(f"index download failed: {exc}") from exc
        tmp = index_path.with_suffix(".tmp")
        tmp.write_bytes(response.content)
        os.replace(tmp, index_path)
    return _parse_index_text(index_path.read_text(encoding="latin-1"))


def resolve(name: str, index: CollectionIndex) -> MatrixRef:
    """Resolve a bare or ``group/name`` string to a unique reference."""
    if not name:
        raise ValueError("matrix name must be non-empty")
    if "/" in name:
        group, bare = name.split("/", 1)
        index.entry(group, bare)
        return MatrixRef(name=bare, group=group)
    matches = index.matches(name)
    if not matches:
        raise MatrixNotFoundError(f"no collection entry named {name!r}")
    if len(matches) > 1:
        groups = ", ".join(sorted(e.group for e in matches))
        raise AmbiguousNameError(
            f"{name!r} exists in several groups ({groups}); "
            f"qualify it as group/name"
        )
    return MatrixRef(name=name, group=matches[0].group)


class _RefLock:
    """Directory-based mutual exclusion for one cache slot."""

    def __init__(self, directory: Path):
        self.path = directory / ".lock"

    def __enter__(self):
        deadline = time.monotonic() + _LOCK_TIMEOUT_S
        while True:
            try:
                os.mkdir(self.path)
                return self
            except FileExistsError:
                if time.monotonic() > deadline:
                    raise CollectionError(
                        f"timed out waiting for lock {self.path}"
                    ) from None
                time.sleep(0.05)

    def __exit__(self, *exc_info):
        try:
            os.rmdir(self.path)
        except OSError:
            pass
        return False


def _select_mtx_member(tar: tarfile.TarFile, name: str):
    members = [m for m in tar.getmembers()
               if m.isfile() and m.name.lower().endswith(".mtx")]
    for m in members:
        if os.path.basename(m.name) == f"{name}.mtx":
            return m
    if len(members) == 1:
        return members[0]
    raise CollectionError(
        f"archive for {name!r} does not contain {name}.mtx "
        f"({len(members)} .mtx members found)"
    )


def _download_archive(url: str, dest: Path, session) -> None:
    http = session or requests
    try:
        with http.get(url, stream=True, timeout=_HTTP_TIMEOUT) as response:
            response.raise_for_status()
            with open(dest, "wb") as fh:
                for chunk in response.iter_content(1 << 20):
                    fh.write(chunk)
    except requests.RequestException as exc:
        raise NetworkError(f"download failed: {url}: {exc}") from exc


def _sidecar_is_valid(mtx_path: Path, sidecar_path: Path):
    """Return (checksum, fetched_at) when the cache slot verifies."""
    try:
        recorded = json.loads(sidecar_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    expected = recorded.get("sha256")
    if not expected:
        return None
    actual = _sha256(mtx_path)
    if actual != expected:
        raise ChecksumError(
            f"cached file {mtx_path} does not match its recorded digest "
            f"(expected {expected[:12]}..., found {actual[:12]}...)"
        )
    return expected, recorded.get("fetched_at", "")


def fetch(ref: MatrixRef, cache_dir=None, *, base_url: str | None = None,
          session=None, retry: bool = False) -> CacheEntry:
    """Download (or reuse) the Matrix Market file for ``ref``.

    A valid cache hit performs no network I/O.  A corrupted cache slot
    raises ``ChecksumError``; pass ``retry=True`` to discard it and
    download again.  Concurrent fetches of the same ref serialize on a
    per-ref lock so the archive is downloaded once.
    """
    if not ref.resolved:
        raise ValueError("fetch needs a resolved ref (group and name)")
    cache_dir = Path(cache_dir) if cache_dir else default_cache_dir()
    slot = cache_dir / ref.group / ref.name
    slot.mkdir(parents=True, exist_ok=True)
    mtx_path = slot / f"{ref.name}.mtx"
    sidecar_path = slot / f"{ref.name}.json"

    with _RefLock(slot):
        if mtx_path.exists() and sidecar_path.exists():
            try:
                verified = _sidecar_is_valid(mtx_path, sidecar_path)
            except ChecksumError:
                if not retry:
                    raise
                verified = None
            if verified:
                checksum, fetched_at = verified
                return CacheEntry(ref=ref, local_path=mtx_path,
                                  checksum=checksum, fetched_at=fetched_at)

        url = f"{_base_url(base_url)}/MM/{ref.group}/{ref.name}.tar.gz"
        with tempfile.TemporaryDirectory(dir=slot) as tmpdir:
            archive = Path(tmpdir) / "archive.tar.gz"
            _download_archive(url, archive, session)
            extracted = Path(tmpdir) / "matrix.mtx"
            try:
                with tarfile.open(archive, "r:*") as tar:
                    member = _select_mtx_member(tar, ref.name)
                    src = tar.extractfile(member)
                    if src is None:
                        raise CollectionError(
                            f"cannot read {member.name} from archive"
                        )
                    with src, open(extracted, "wb") as dst:
                        shutil.copyfileobj(src, dst)
            except tarfile.TarError as exc:
                raise CollectionError(
                    f"invalid archive from {url}: {exc}"
                ) from exc
            # Refuse to cache anything that does not parse.
            parse_matrix_market(extracted)
            checksum = _sha256(extracted)
            fetched_at = _utcnow()
            os.replace(extracted, mtx_path)
        sidecar_tmp = sidecar_path.with_suffix(".tmp")
        sidecar_tmp.write_text(
            json.dumps({
                "group": ref.group,
                "name": ref.name,
                "sha256": checksum,
                "source_url": url,
                "fetched_at": fetched_at,
            }, indent=2),
            encoding="utf-8",
        )
        os.replace(sidecar_tmp, sidecar_path)
    return CacheEntry(ref=ref, local_path=mtx_path, checksum=checksum,
                      fetched_at=fetched_at)
