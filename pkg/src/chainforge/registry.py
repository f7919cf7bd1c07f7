"""Registry metadata ingestion.

Reads JSON-Lines dumps where each line describes one released distribution:

    {"name": "...", "version": "...", "upload_time": "...", "requires_dist": [...]}

Malformed lines are counted and skipped; a stream where no line parses at
all is rejected as not being JSON-Lines. Versions that do not follow the
version grammar are skipped with a count (the registry predates strict
enforcement). Duplicate (package, version) lines merge: dependency
declarations are unioned and the earliest upload time wins.

The built :class:`Registry` is immutable in practice (nothing mutates it
after ingestion) and safe for concurrent reads. Its content hash is
stamped into every derived artifact so later stages can refuse to mix
artifacts from different dumps.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator

from .errors import FormatError, InvalidName, InvalidVersion
from .requirements import normalize_name
from .versions import Version, normalize, parse_version, sort_key

__all__ = ["ReleaseRecord", "IngestStats", "Registry", "ingest", "ingest_path"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReleaseRecord:
    """One released version of one package."""

    package: str                       # normalized name
    version: Version
    upload_time: datetime | None       # UTC; None when the dump lacks it
    requires_dist: tuple[str, ...]     # raw declaration strings, sorted


@dataclass
class IngestStats:
    lines: int = 0
    parsed: int = 0
    malformed_lines: int = 0
    skipped_versions: int = 0
    merged_duplicates: int = 0

    def as_dict(self) -> dict:
        return {
            "lines": self.lines,
            "parsed": self.parsed,
            "malformed_lines": self.malformed_lines,
            "skipped_versions": self.skipped_versions,
            "merged_duplicates": self.merged_duplicates,
        }


class Registry:
    """All known packages and their released versions."""

    def __init__(self) -> None:
        self._packages: dict[str, dict[str, ReleaseRecord]] = {}
        self._hash: str | None = None

    # -- construction ---------------------------------------------------------

    def _add(self, record: ReleaseRecord) -> bool:
        """Insert or merge; returns True when merged into an existing record."""
        releases = self._packages.setdefault(record.package, {})
        version_id = normalize(record.version)
        existing = releases.get(version_id)
        if existing is None:
            releases[version_id] = record
            return False
        requires = tuple(sorted(set(existing.requires_dist) | set(record.requires_dist)))
        times = [t for t in (existing.upload_time, record.upload_time) if t is not None]
        releases[version_id] = ReleaseRecord(
            package=record.package,
            version=existing.version,
            upload_time=min(times) if times else None,
            requires_dist=requires,
        )
        return True

    # -- queries ----------------------------------------------------------------

    def packages(self) -> list[str]:
        return sorted(self._packages)

    def has_package(self, name: str) -> bool:
        return name in self._packages

    def get_all_versions(self, name: str) -> list[Version]:
        """All released versions of ``name`` ascending; [] for unknown packages."""
        releases = self._packages.get(name)
        if not releases:
            return []
        return sorted((r.version for r in releases.values()), key=sort_key)

    def get_release(self, name: str, version_id: str) -> ReleaseRecord | None:
        return self._packages.get(name, {}).get(version_id)

    def iter_releases(self) -> Iterator[ReleaseRecord]:
        for name in sorted(self._packages):
            releases = self._packages[name]
            for version_id in sorted(releases):
                yield releases[version_id]

    @property
    def package_count(self) -> int:
        return len(self._packages)

    @property
    def release_count(self) -> int:
        return sum(len(r) for r in self._packages.values())

    def content_hash(self) -> str:
        """Order-independent digest of the full ingested content."""
        if self._hash is None:
            hasher = hashlib.sha256()
            for record in self.iter_releases():
                stamp = record.upload_time.isoformat() if record.upload_time else ""
                line = "\x1f".join(
                    (record.package, normalize(record.version), stamp)
                    + record.requires_dist
                )
                hasher.update(line.encode("utf-8"))
                hasher.update(b"\n")
            self._hash = hasher.hexdigest()
        return self._hash

    def set_content_hash(self, value: str) -> None:
        """Adopt a previously computed hash (for indexes rebuilt from a DB)."""
        self._hash = value


def ingest(lines: Iterable[str]) -> tuple[Registry, IngestStats]:
    """Build a :class:`Registry` from an iterable of JSON-Lines strings.

    Raises :class:`~chainforge.errors.FormatError` when the stream contains
    lines but none of them is a valid record, i.e. it is not JSON-Lines
    at all.
    """
    registry = Registry()
    stats = IngestStats()
    for line in lines:
        text = line.strip()
        if not text:
            continue
        stats.lines += 1
        try:
            record = _parse_line(text)
        except _Malformed as exc:
            stats.malformed_lines += 1
            logger.debug("skipping malformed line: %s", exc)
            continue
        except _BadVersion as exc:
            stats.skipped_versions += 1
            logger.debug("skipping unparseable version: %s", exc)
            continue
        stats.parsed += 1
        if registry._add(record):
            stats.merged_duplicates += 1
    if stats.lines > 0 and stats.parsed == 0 and stats.skipped_versions == 0:
        raise FormatError("input is not JSON-Lines registry metadata")
    logger.info(
        "ingested %d records (%d malformed, %d bad versions, %d merged)",
        stats.parsed,
        stats.malformed_lines,
        stats.skipped_versions,
        stats.merged_duplicates,
    )
    return registry, stats


def ingest_path(path: str | os.PathLike) -> tuple[Registry, IngestStats]:
    with open(path, "r", encoding="utf-8") as handle:
        return ingest(handle)


class _Malformed(ValueError):
    pass


class _BadVersion(ValueError):
    pass


def _parse_line(text: str) -> ReleaseRecord:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _Malformed(f"not JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise _Malformed("line is not an object")
    name = payload.get("name")
    version_text = payload.get("version")
    if not isinstance(name, str) or not isinstance(version_text, str):
        raise _Malformed("missing name or version")
    try:
        package = normalize_name(name)
    except InvalidName as exc:
        raise _Malformed(str(exc)) from exc
    try:
        version = parse_version(version_text)
    except InvalidVersion as exc:
        raise _BadVersion(f"{package}: {exc}") from exc

    requires_raw = payload.get("requires_dist")
    if requires_raw is None:
        requires: tuple[str, ...] = ()
    elif isinstance(requires_raw, list) and all(isinstance(r, str) for r in requires_raw):
        requires = tuple(sorted(set(requires_raw)))
    else:
        raise _Malformed("requires_dist must be a list of strings or null")

    return ReleaseRecord(
        package=package,
        version=version,
        upload_time=_parse_upload_time(payload.get("upload_time")),
        requires_dist=requires,
    )


def _parse_upload_time(value: object) -> datetime | None:
    if not isinstance(value, str) or not value.strip():
        return None
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        return None
    if parsed.tzinfo is None:
        return parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)
