"""The version-sensitive dependency database.

Materializes every concrete dependency fact derivable from the registry:
a record (up_name, up_version, down_name, down_version, extra_gated)
exists exactly when down_version of down_name declares a requirement on
up_name and up_version satisfies the declared version constraint.
Requirements on packages absent from the registry produce no records;
self-dependencies are kept.

Records live in SQLite so that dependent lookups stay sub-linear in the
total record count, and so a build can be persisted once and reused by
every later analysis stage. A build manifest (record count, skip counts,
options, registry content hash) travels with the database.
"""

from __future__ import annotations

import json
import logging
import os
import sqlite3
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

from .errors import FormatError, InvalidRequirement
from .registry import Registry, ReleaseRecord
from .requirements import normalize_name, parse_requirement, satisfying_versions
from .versions import Version, normalize, parse_version, sort_key

__all__ = ["DepRecord", "DependencyDb", "build_dependency_db", "load_dependency_db"]

logger = logging.getLogger(__name__)

_SCHEMA_VERSION = 1

_SCHEMA = """
CREATE TABLE deps (
    up_name TEXT NOT NULL,
    up_version TEXT NOT NULL,
    down_name TEXT NOT NULL,
    down_version TEXT NOT NULL,
    extra_gated INTEGER NOT NULL
);
CREATE TABLE releases (
    package TEXT NOT NULL,
    version TEXT NOT NULL,
    upload_time TEXT,
    PRIMARY KEY (package, version)
);
CREATE TABLE meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""

_INDEXES = """
CREATE INDEX idx_deps_up ON deps (up_name, up_version);
CREATE INDEX idx_deps_down ON deps (down_name, down_version);
"""


@dataclass(frozen=True)
class DepRecord:
    """One concrete dependency fact; versions are normalized strings."""

    up_name: str
    up_version: str
    down_name: str
    down_version: str
    extra_gated: bool


class DependencyDb:
    """SQLite-backed store of dependency records plus the release index."""

    def __init__(self, conn: sqlite3.Connection):
        self._conn = conn
        self._lock = threading.Lock()

    # -- queries ---------------------------------------------------------------

    def get_dependents(self, name: str, version: Version | str) -> list[tuple[str, list[Version]]]:
        """Packages depending on ``name`` at ``version``.

        Returns (dependent_name, [dependent versions]) pairs, names
        ascending and versions ascending.
        """
        name = normalize_name(name)
        version_id = version if isinstance(version, str) else normalize(version)
        with self._lock:
            rows = self._conn.execute(
                "SELECT DISTINCT down_name, down_version FROM deps "
                "WHERE up_name = ? AND up_version = ?",
                (name, version_id),
            ).fetchall()
        grouped: dict[str, list[Version]] = {}
        for down_name, down_version in rows:
            grouped.setdefault(down_name, []).append(parse_version(down_version))
        return [
            (down_name, sorted(grouped[down_name], key=sort_key))
            for down_name in sorted(grouped)
        ]

    def iter_records(self) -> Iterator[DepRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT up_name, up_version, down_name, down_version, extra_gated "
                "FROM deps ORDER BY rowid"
            ).fetchall()
        for row in rows:
            yield DepRecord(row[0], row[1], row[2], row[3], bool(row[4]))

    @property
    def record_count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM deps").fetchone()[0]

    @property
    def manifest(self) -> dict:
        with self._lock:
            row = self._conn.execute(
                "SELECT value FROM meta WHERE key = 'manifest'"
            ).fetchone()
        return json.loads(row[0]) if row else {}

    @property
    def registry_hash(self) -> str | None:
        return self.manifest.get("registry_hash")

    def release_index(self) -> Registry:
        """Rebuild a version/upload-time index from the embedded release table.

        The index carries the original registry content hash; dependency
        declarations are not retained (they are already materialized).
        """
        from .registry import _parse_upload_time  # local import to reuse the parser

        registry = Registry()
        with self._lock:
            rows = self._conn.execute(
                "SELECT package, version, upload_time FROM releases"
            ).fetchall()
        for package, version_id, upload_time in rows:
            registry._add(
                ReleaseRecord(
                    package=package,
                    version=parse_version(version_id),
                    upload_time=_parse_upload_time(upload_time),
                    requires_dist=(),
                )
            )
        stored = self.registry_hash
        if stored:
            registry.set_content_hash(stored)
        return registry

    # -- persistence -------------------------------------------------------------

    def save(self, path: str | os.PathLike) -> None:
        """Persist atomically: write to a temp file, then rename into place."""
        directory = os.path.dirname(os.path.abspath(path)) or "."
        fd, tmp_path = tempfile.mkstemp(prefix=".depdb-", dir=directory)
        os.close(fd)
        try:
            target = sqlite3.connect(tmp_path)
            with self._lock, target:
                self._conn.backup(target)
            target.close()
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DependencyDb":
        if not os.path.exists(path):
            raise FileNotFoundError(f"dependency database not found: {path}")
        conn = sqlite3.connect(path, check_same_thread=False)
        try:
            row = conn.execute("SELECT value FROM meta WHERE key = 'schema'").fetchone()
        except sqlite3.DatabaseError as exc:
            conn.close()
            raise FormatError(f"not a dependency database: {path}") from exc
        if row is None or int(row[0]) != _SCHEMA_VERSION:
            conn.close()
            raise FormatError(f"unsupported dependency database schema in {path}")
        return cls(conn)

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "DependencyDb":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def build_dependency_db(
    registry: Registry,
    *,
    include_extra_gated: bool = True,
    threads: int = 1,
    extra_manifest: dict | None = None,
) -> DependencyDb:
    """Materialize all dependency records from ``registry``.

    ``include_extra_gated=False`` drops requirements whose marker
    references the ``extra`` variable. ``threads`` only affects wall
    time; the result is identical for any thread count because records
    are canonically sorted before insertion.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")

    releases = list(registry.iter_releases())
    skipped_requirements = 0

    def resolve(chunk: list[ReleaseRecord]) -> tuple[list[tuple], int]:
        rows: list[tuple] = []
        skipped = 0
        for release in chunk:
            down_version = normalize(release.version)
            for declaration in release.requires_dist:
                try:
                    requirement = parse_requirement(declaration)
                except InvalidRequirement:
                    skipped += 1
                    continue
                if requirement.extra_gated and not include_extra_gated:
                    continue
                candidates = registry.get_all_versions(requirement.name)
                if not candidates:
                    continue
                for up in satisfying_versions(requirement.specifiers, candidates):
                    rows.append(
                        (
                            requirement.name,
                            normalize(up),
                            release.package,
                            down_version,
                            int(requirement.extra_gated),
                        )
                    )
        return rows, skipped

    if threads == 1 or len(releases) < 2:
        all_rows, skipped_requirements = resolve(releases)
    else:
        chunk_size = max(1, (len(releases) + threads - 1) // threads)
        chunks = [releases[i : i + chunk_size] for i in range(0, len(releases), chunk_size)]
        all_rows = []
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rows, skipped in pool.map(resolve, chunks):
                all_rows.extend(rows)
                skipped_requirements += skipped

    # One record per (up, up_version, down, down_version): a pair stays
    # extra-gated only when every declaration producing it was gated.
    gated_by_pair: dict[tuple[str, str, str, str], int] = {}
    for up_name, up_id, down_name, down_id, gated in all_rows:
        pair = (up_name, up_id, down_name, down_id)
        gated_by_pair[pair] = min(gated_by_pair.get(pair, 1), gated)

    # Canonical order: set semantics plus deterministic bytes on disk.
    version_keys: dict[str, tuple] = {}

    def key_of(version_id: str) -> tuple:
        cached = version_keys.get(version_id)
        if cached is None:
            cached = sort_key(parse_version(version_id))
            version_keys[version_id] = cached
        return cached

    unique_rows = sorted(
        (pair + (gated,) for pair, gated in gated_by_pair.items()),
        key=lambda r: (r[0], key_of(r[1]), r[2], key_of(r[3])),
    )

    conn = sqlite3.connect(":memory:", check_same_thread=False)
    conn.executescript(_SCHEMA)
    conn.executemany("INSERT INTO deps VALUES (?, ?, ?, ?, ?)", unique_rows)
    conn.executemany(
        "INSERT INTO releases VALUES (?, ?, ?)",
        [
            (
                release.package,
                normalize(release.version),
                release.upload_time.isoformat() if release.upload_time else None,
            )
            for release in releases
        ],
    )
    manifest = {
        "records": len(unique_rows),
        "skipped_versions": 0,
        "skipped_requirements": skipped_requirements,
        "options": {"include_extra_gated": include_extra_gated},
        "registry_hash": registry.content_hash(),
        "packages": registry.package_count,
        "releases": registry.release_count,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    conn.execute(
        "INSERT INTO meta VALUES ('manifest', ?)",
        (json.dumps(manifest, sort_keys=True),),
    )
    conn.execute("INSERT INTO meta VALUES ('schema', ?)", (str(_SCHEMA_VERSION),))
    conn.executescript(_INDEXES)
    conn.commit()
    logger.info(
        "built dependency db: %d records from %d releases (%d requirements skipped)",
        len(unique_rows),
        len(releases),
        skipped_requirements,
    )
    return DependencyDb(conn)


def load_dependency_db(path: str | os.PathLike) -> DependencyDb:
    return DependencyDb.load(path)
