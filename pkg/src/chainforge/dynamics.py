"""Package disengagement detection, trend aggregation, and statistics.

A non-seed package has *disengaged* when the latest version inside the
supply chain (``v_sc``) is older than the latest version on the
registry (``v_pypi``): the newer releases dropped the dependency that
had pulled the package into the chain. The disengagement event is dated
by the first release after ``v_sc``.

The statistics helpers (Mann-Whitney U, Holm-Bonferroni adjustment,
two-proportion z-test) are self-contained so results are reproducible
to the digit across environments.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from chainforge.chain import SupplyChainGraph
from chainforge.errors import (
    EmptySample,
    FormatError,
    InvalidCounts,
    InvalidP,
)
from chainforge.registry import Registry
from chainforge.requirements import normalize_name
from chainforge.versions import normalize, parse_version, sort_key

__all__ = [
    "DisengagementRecord",
    "DownloadsTable",
    "detect_disengaged",
    "quarterly_trend",
    "load_downloads_csv",
    "popular_packages",
    "mann_whitney_u",
    "holm_bonferroni",
    "proportion_z_test",
    "build_disengagement_report",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DisengagementRecord:
    """One package that left the supply chain.

    ``v_sc`` and ``v_pypi`` are normalized version identifiers;
    ``event_time`` is the upload time of the earliest release after
    ``v_sc`` (None when the registry lacks it, in which case
    ``quarter`` is "unknown").
    """

    package: str
    v_sc: str
    v_pypi: str
    event_time: datetime | None
    quarter: str

    def as_dict(self) -> dict:
        return {
            "package": self.package,
            "v_sc": self.v_sc,
            "v_pypi": self.v_pypi,
            "event_time": self.event_time.isoformat() if self.event_time else None,
            "quarter": self.quarter,
        }


@dataclass(frozen=True)
class DownloadsTable:
    """Monthly download counts per (normalized) package name."""

    counts: Mapping[str, int]
    window: tuple[str, str] | None = None


def _quarter_of(moment: datetime) -> str:
    return f"{moment.year}Q{(moment.month - 1) // 3 + 1}"


def detect_disengaged(
    graph: SupplyChainGraph,
    registry: Registry,
    *,
    include_prereleases: bool = True,
) -> list[DisengagementRecord]:
    """Find every non-seed package whose latest release left the chain.

    "Latest" uses the full version order including pre-releases by
    default; with ``include_prereleases=False`` both sides consider
    final releases only (packages with no final release on either side
    are skipped as incomparable). For every package, v_sc <= v_pypi
    must hold because the graph was built from the registry; a greater
    v_sc indicates mismatched inputs and trips an assertion.
    """
    records = []
    for node in graph.nodes.values():
        if node.is_seed:
            continue
        sc_versions = [parse_version(v) for v in node.vs]
        registry_versions = list(registry.get_all_versions(node.name))
        if not include_prereleases:
            sc_versions = [v for v in sc_versions if not v.is_prerelease]
            registry_versions = [v for v in registry_versions if not v.is_prerelease]
        if not sc_versions or not registry_versions:
            continue
        v_sc = max(sc_versions)
        v_pypi = max(registry_versions)
        assert not v_pypi < v_sc, (
            f"{node.name}: supply-chain version {normalize(v_sc)} exceeds "
            f"registry version {normalize(v_pypi)}; graph and registry disagree"
        )
        if not v_sc < v_pypi:
            continue  # current: latest registry release is still in the chain

        first_after = min((v for v in registry_versions if v_sc < v), key=sort_key)
        release = registry.get_release(node.name, normalize(first_after))
        event_time = release.upload_time if release else None
        quarter = _quarter_of(event_time) if event_time else "unknown"
        records.append(
            DisengagementRecord(
                package=node.name,
                v_sc=normalize(v_sc),
                v_pypi=normalize(v_pypi),
                event_time=event_time,
                quarter=quarter,
            )
        )
    logger.info(
        "disengagement: %d of %d packages flagged",
        len(records),
        sum(1 for n in graph.nodes.values() if not n.is_seed),
    )
    return records


def quarterly_trend(records: Iterable[DisengagementRecord]) -> dict[str, int]:
    """Counts per calendar quarter, gaps filled with 0 over the span.

    Records with quarter "unknown" are tallied in a trailing "unknown"
    bucket and do not extend the span.
    """
    counts: dict[str, int] = {}
    unknown = 0
    for record in records:
        if record.quarter == "unknown":
            unknown += 1
        else:
            counts[record.quarter] = counts.get(record.quarter, 0) + 1
    trend: dict[str, int] = {}
    if counts:
        quarters = sorted(
            (int(year), int(number))
            for year, number in (q.split("Q") for q in counts)
        )
        year, quarter = quarters[0]
        last = quarters[-1]
        while (year, quarter) <= last:
            label = f"{year}Q{quarter}"
            trend[label] = counts.get(label, 0)
            quarter += 1
            if quarter == 5:
                year, quarter = year + 1, 1
    if unknown:
        trend["unknown"] = unknown
    return trend


def load_downloads_csv(source: str | Path | Iterable[str]) -> DownloadsTable:
    """Read a "package,downloads" CSV into a DownloadsTable.

    Package names are normalized; on duplicate names the last row wins.
    Counts must be non-negative integers.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
        lines: Iterable[str] = io.StringIO(text)
    else:
        lines = source
    reader = csv.reader(lines)
    rows = [row for row in reader if row]
    if not rows or [cell.strip() for cell in rows[0]] != ["package", "downloads"]:
        raise FormatError('downloads CSV must start with header "package,downloads"')
    counts: dict[str, int] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError(f"downloads CSV line {lineno}: expected 2 columns")
        name, raw_count = row[0].strip(), row[1].strip()
        try:
            count = int(raw_count)
        except ValueError:
            raise FormatError(
                f"downloads CSV line {lineno}: {raw_count!r} is not an integer"
            ) from None
        if count < 0:
            raise FormatError(f"downloads CSV line {lineno}: negative count {count}")
        counts[normalize_name(name)] = count
    return DownloadsTable(counts=counts)


def popular_packages(
    members: Iterable[str],
    table: DownloadsTable,
    mode: str = "ecosystem_mean",
    threshold: float | None = None,
) -> set[str]:
    """Members with downloads strictly greater than the threshold.

    ``ecosystem_mean`` averages over ALL table entries (not just the
    members); ``explicit`` uses the given threshold. Members missing
    from the table count as 0 downloads.
    """
    if mode == "ecosystem_mean":
        values = list(table.counts.values())
        cutoff = sum(values) / len(values) if values else 0.0
    elif mode == "explicit":
        if threshold is None:
            raise ValueError("explicit mode requires a threshold")
        cutoff = float(threshold)
    else:
        raise ValueError(f"unknown popularity mode: {mode!r}")
    return {name for name in members if table.counts.get(name, 0) > cutoff}


# ---------------------------------------------------------------------------
# statistics


_ALTERNATIVES = ("two-sided", "greater", "less")


def _check_alternative(alternative: str) -> None:
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


EXACT_LIMIT = 400  # switch to the normal approximation above n_a * n_b


def mann_whitney_u(
    a: Sequence[float],
    b: Sequence[float],
    alternative: str = "two-sided",
) -> dict:
    """Mann-Whitney U test with mid-ranks for ties.

    Returns {"U": U of the first sample, "p_value": p, "method": ...}.
    The p-value is exact (permutation distribution of the rank sum)
    when n_a * n_b <= 400, otherwise a normal approximation with tie
    and continuity corrections. "greater" means the first sample tends
    to exceed the second.
    """
    _check_alternative(alternative)
    if not a or not b:
        raise EmptySample("both samples must be non-empty")
    n_a, n_b = len(a), len(b)
    n = n_a + n_b

    pooled = sorted((float(value), 0 if i < n_a else 1) for i, value in
                    enumerate(list(a) + list(b)))
    # doubled ranks stay integral under mid-rank ties
    doubled_rank_sum_a = 0
    tie_blocks: list[int] = []
    index = 0
    while index < n:
        j = index
        while j < n and pooled[j][0] == pooled[index][0]:
            j += 1
        block = j - index
        doubled_mid = 2 * index + block + 1  # 2 * average of ranks index+1 .. j
        doubled_rank_sum_a += doubled_mid * sum(
            1 for k in range(index, j) if pooled[k][1] == 0
        )
        tie_blocks.append(block)
        index = j
    u_a = doubled_rank_sum_a / 2.0 - n_a * (n_a + 1) / 2.0

    if n_a * n_b <= EXACT_LIMIT:
        p = _exact_mwu_p(tie_blocks, pooled, n_a, doubled_rank_sum_a, alternative)
        method = "exact"
    else:
        p = _asymptotic_mwu_p(u_a, n_a, n_b, tie_blocks, alternative)
        method = "asymptotic"
    return {"U": u_a, "p_value": p, "method": method}


def _exact_mwu_p(
    tie_blocks: list[int],
    pooled: list[tuple[float, int]],
    n_a: int,
    observed_doubled: int,
    alternative: str,
) -> float:
    """Exact permutation distribution of the doubled rank sum.

    Dynamic program over tie blocks; equivalent to enumerating all
    C(n, n_a) assignments of labels to the pooled sample.
    """
    dist: dict[tuple[int, int], int] = {(0, 0): 1}
    index = 0
    for block in tie_blocks:
        doubled_mid = 2 * index + block + 1
        index += block
        next_dist: dict[tuple[int, int], int] = {}
        for (used, total), ways in dist.items():
            for take in range(0, min(block, n_a - used) + 1):
                key = (used + take, total + take * doubled_mid)
                next_dist[key] = next_dist.get(key, 0) + ways * math.comb(block, take)
        dist = next_dist
    spectrum = {
        total: ways for (used, total), ways in dist.items() if used == n_a
    }
    universe = sum(spectrum.values())
    assert universe == math.comb(len(pooled), n_a)
    at_least = sum(w for total, w in spectrum.items() if total >= observed_doubled)
    at_most = sum(w for total, w in spectrum.items() if total <= observed_doubled)
    p_greater = at_least / universe
    p_less = at_most / universe
    if alternative == "greater":
        return p_greater
    if alternative == "less":
        return p_less
    return min(1.0, 2.0 * min(p_greater, p_less))


def _asymptotic_mwu_p(
    u_a: float,
    n_a: int,
    n_b: int,
    tie_blocks: list[int],
    alternative: str,
) -> float:
    n = n_a + n_b
    mu = n_a * n_b / 2.0
    tie_term = sum(t**3 - t for t in tie_blocks) / (n * (n - 1))
    sigma = math.sqrt(n_a * n_b / 12.0 * ((n + 1) - tie_term))
    if sigma == 0.0:
        return 1.0  # every observation tied: no evidence either way
    u_b = n_a * n_b - u_a
    if alternative == "greater":
        return _normal_sf((u_a - mu - 0.5) / sigma)
    if alternative == "less":
        return _normal_sf((u_b - mu - 0.5) / sigma)
    u_max = max(u_a, u_b)
    return min(1.0, 2.0 * _normal_sf((u_max - mu - 0.5) / sigma))


def holm_bonferroni(p_values: Sequence[float]) -> list[float]:
    """Step-down Holm adjustment, returned in input order."""
    for p in p_values:
        if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
            raise InvalidP(p)
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, original in enumerate(order):
        candidate = (m - rank) * p_values[original]
        running = max(running, min(1.0, candidate))
        adjusted[original] = min(1.0, running)
    return adjusted


def proportion_z_test(
    x1: int,
    n1: int,
    x2: int,
    n2: int,
    alternative: str = "greater",
) -> dict:
    """Pooled two-proportion z-test.

    "greater" tests whether proportion 1 exceeds proportion 2 (the
    default, matching a one-sided design). Returns {"z", "p_value"}.
    """
    _check_alternative(alternative)
    for x, n in ((x1, n1), (x2, n2)):
        if not (isinstance(x, int) and isinstance(n, int)):
            raise InvalidCounts(f"counts must be integers, got {x!r}/{n!r}")
        if n <= 0 or x < 0 or x > n:
            raise InvalidCounts(f"need 0 <= x <= n with n > 0, got {x}/{n}")
    p1, p2 = x1 / n1, x2 / n2
    pooled = (x1 + x2) / (n1 + n2)
    variance = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)
    z = (p1 - p2) / math.sqrt(variance) if variance > 0.0 else 0.0
    if alternative == "greater":
        p = _normal_sf(z)
    elif alternative == "less":
        p = 1.0 - _normal_sf(z)
    else:
        p = min(1.0, 2.0 * _normal_sf(abs(z)))
    return {"z": z, "p_value": p}


def build_disengagement_report(
    graph: SupplyChainGraph,
    registry: Registry,
    *,
    include_prereleases: bool = True,
) -> dict:
    """Disengagement records plus quarterly trend as a JSON-ready dict."""
    records = detect_disengaged(
        graph, registry, include_prereleases=include_prereleases
    )
    return {
        "params": {"include_prereleases": include_prereleases},
        "registry_hash": graph.registry_hash,
        "records": [record.as_dict() for record in records],
        "trend": quarterly_trend(records),
    }
