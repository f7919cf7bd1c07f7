"""File-based pipeline stages behind the CLI and the HTTP service.

Each ``run_*`` function is a pure function of its input files and
flags: identical inputs produce identical outputs. Timestamps appear
only in manifests and are suppressed by ``stable=True`` so artifacts
can be diffed byte-for-byte. All writes go through a write-then-rename
so failures never leave partial files behind.

Every artifact carries the content hash of the registry dump it was
derived from; stages that combine artifacts refuse mixed hashes with
:class:`~chainforge.errors.ArtifactMismatch`.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from chainforge.chain import (
    EXPORT_FORMATS,
    SupplyChainGraph,
    build_supply_chain,
    export_graph,
    graph_stats,
    import_graph,
)
from chainforge.clusters import build_cluster_report, cluster_dot
from chainforge.depdb import DependencyDb, build_dependency_db
from chainforge.dynamics import (
    build_disengagement_report,
    load_downloads_csv,
    popular_packages,
)
from chainforge.errors import ArtifactMismatch, FormatError, UnsupportedFormat
from chainforge.registry import ingest_path

__all__ = [
    "configure_logging",
    "atomic_write_bytes",
    "run_ingest_db",
    "run_build_sc",
    "run_export",
    "run_clusters",
    "run_disengagement",
    "run_report",
    "REPORT_FORMATS",
]

logger = logging.getLogger(__name__)

LOG_ENV_VAR = "CHAINFORGE_LOG"
REPORT_FORMATS = ("json", "markdown")


def configure_logging() -> None:
    """Set package-logger verbosity from the CHAINFORGE_LOG env var."""
    level_name = os.environ.get(LOG_ENV_VAR, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    package_logger = logging.getLogger("chainforge")
    package_logger.setLevel(level)
    if not package_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        package_logger.addHandler(handler)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temporary sibling file and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise


def _atomic_write_json(path: str | Path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: expected a JSON object")
    return payload


def _load_graph(path: str | Path) -> SupplyChainGraph:
    return import_graph(_read_json(path))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_ingest_db(
    input_path: str | Path,
    db_path: str | Path,
    *,
    include_extra_gated: bool = True,
    threads: int = 1,
) -> dict:
    """Ingest a metadata JSONL dump and materialize the dependency DB."""
    registry, stats = ingest_path(input_path)
    db = build_dependency_db(
        registry,
        include_extra_gated=include_extra_gated,
        threads=threads,
        extra_manifest={"ingest": stats.as_dict(), "input": str(input_path)},
    )
    try:
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        db.save(db_path)
        manifest = db.manifest
    finally:
        db.close()
    logger.info("ingest-db: %s -> %s (%d records)",
                input_path, db_path, manifest["records"])
    return manifest


def run_build_sc(
    db_path: str | Path,
    seeds: list[str],
    out_path: str | Path,
    *,
    on_missing_seed: str = "error",
    stable: bool = False,
) -> dict:
    """Build the supply-chain graph of ``seeds`` and write it as JSON."""
    with DependencyDb.load(db_path) as db:
        registry = db.release_index()
        graph = build_supply_chain(
            db,
            registry,
            seeds,
            on_missing_seed=on_missing_seed,
            built_at=None if stable else _now(),
        )
    atomic_write_bytes(out_path, export_graph(graph, "json"))
    stats = graph_stats(graph)
    logger.info("build-sc: %s -> %s (%s)", db_path, out_path, stats)
    return stats


def run_export(
    graph_path: str | Path,
    out_path: str | Path,
    fmt: str,
) -> dict:
    """Re-export a saved graph in another format."""
    if fmt not in EXPORT_FORMATS:
        raise UnsupportedFormat(fmt, EXPORT_FORMATS)
    graph = _load_graph(graph_path)
    data = export_graph(graph, fmt)
    atomic_write_bytes(out_path, data)
    return {"format": fmt, "out": str(out_path), "bytes": len(data)}


def run_clusters(
    graph_path: str | Path,
    out_path: str | Path,
    *,
    rng_seed: int = 0,
    resolution: float = 1.0,
    max_passes: int = 10,
    dot_dir: str | Path | None = None,
) -> dict:
    """Prune, cluster, classify, and write the cluster report."""
    graph = _load_graph(graph_path)
    report = build_cluster_report(
        graph, rng_seed=rng_seed, resolution=resolution, max_passes=max_passes
    )
    _atomic_write_json(out_path, report)
    if dot_dir is not None:
        from chainforge.clusters import analyze_clusters, detect_communities, prune

        Path(dot_dir).mkdir(parents=True, exist_ok=True)
        pruned = prune(graph)
        partition = detect_communities(
            pruned, rng_seed=rng_seed, resolution=resolution, max_passes=max_passes
        )
        for cluster in analyze_clusters(partition, pruned):
            atomic_write_bytes(
                Path(dot_dir) / f"cluster_{cluster.id}.dot",
                cluster_dot(cluster).encode("utf-8"),
            )
    return report


def run_disengagement(
    graph_path: str | Path,
    db_path: str | Path,
    out_path: str | Path,
    *,
    include_prereleases: bool = True,
) -> dict:
    """Detect disengaged packages against the registry behind ``db_path``."""
    graph = _load_graph(graph_path)
    with DependencyDb.load(db_path) as db:
        registry = db.release_index()
        _check_same_registry(graph.registry_hash, registry.content_hash(),
                             graph_path, db_path)
        report = build_disengagement_report(
            graph, registry, include_prereleases=include_prereleases
        )
    _atomic_write_json(out_path, report)
    return report


def _check_same_registry(
    left: str | None, right: str | None, left_src, right_src
) -> None:
    if left and right and left != right:
        raise ArtifactMismatch(
            f"{left_src} was built from registry {left[:12]}… but "
            f"{right_src} holds registry {right[:12]}…; rebuild from one dump"
        )


def run_report(
    graph_path: str | Path,
    clusters_path: str | Path,
    disengagement_path: str | Path,
    out_path: str | Path,
    *,
    downloads_path: str | Path | None = None,
    fmt: str = "json",
    stable: bool = False,
) -> dict:
    """Consolidate prior artifacts into one summary document."""
    if fmt not in REPORT_FORMATS:
        raise UnsupportedFormat(fmt, REPORT_FORMATS)
    missing = [
        str(path)
        for path in (graph_path, clusters_path, disengagement_path)
        if not Path(path).exists()
    ]
    if missing:
        raise FileNotFoundError("missing inputs: " + ", ".join(missing))

    graph = _load_graph(graph_path)
    cluster_report = _read_json(clusters_path)
    disengagement_report = _read_json(disengagement_path)
    for source, payload in (
        (clusters_path, cluster_report),
        (disengagement_path, disengagement_report),
    ):
        _check_same_registry(
            graph.registry_hash, payload.get("registry_hash"), graph_path, source
        )

    summary: dict = {
        "registry_hash": graph.registry_hash,
        "seeds": list(graph.seeds),
        "graph": graph_stats(graph),
        "isolated": cluster_report.get("isolated"),
        "shapes": cluster_report.get("summary"),
        "disengagement": {
            "count": len(disengagement_report.get("records", [])),
            "trend": disengagement_report.get("trend", {}),
        },
    }
    if downloads_path is not None:
        table = load_downloads_csv(downloads_path)
        members = {
            node.name for node in graph.nodes.values() if not node.is_seed
        }
        values = list(table.counts.values())
        threshold = sum(values) / len(values) if values else 0.0
        popular = popular_packages(members, table)
        summary["popularity"] = {
            "mode": "ecosystem_mean",
            "threshold": threshold,
            "members": len(members),
            "popular": sorted(popular),
            "popular_count": len(popular),
        }
    if not stable:
        summary["generated_at"] = _now()

    if fmt == "json":
        _atomic_write_json(out_path, summary)
    else:
        atomic_write_bytes(out_path, _render_markdown(summary).encode("utf-8"))
    return summary


def _render_markdown(summary: dict) -> str:
    lines = ["# Supply-chain report", ""]
    lines.append(f"- Seeds: {', '.join(summary['seeds'])}")
    if summary.get("registry_hash"):
        lines.append(f"- Registry: `{summary['registry_hash'][:16]}…`")
    if "generated_at" in summary:
        lines.append(f"- Generated: {summary['generated_at']}")
    stats = summary["graph"]
    lines += [
        "",
        "## Graph",
        "",
        f"- Packages: {stats['packages']}",
        f"- Versions: {stats['versions']}",
        f"- Edges: {stats['edges']}",
    ]
    isolated = summary.get("isolated") or {}
    ratio = isolated.get("ratio")
    lines += [
        "",
        "## Clusters",
        "",
        f"- Isolated nodes: {isolated.get('count', 0)}"
        + (f" ({ratio:.1%})" if ratio is not None else ""),
    ]
    shapes = summary.get("shapes") or {}
    for shape, entry in (shapes.get("by_shape") or {}).items():
        lines.append(
            f"- {shape}: {entry['count']} ({entry['percent']:.1f}%)"
        )
    disengagement = summary["disengagement"]
    lines += ["", "## Disengagement", "", f"- Packages: {disengagement['count']}"]
    for quarter, count in disengagement["trend"].items():
        lines.append(f"- {quarter}: {count}")
    if "popularity" in summary:
        pop = summary["popularity"]
        lines += [
            "",
            "## Popularity",
            "",
            f"- Threshold (mean downloads): {pop['threshold']:.1f}",
            f"- Popular members: {pop['popular_count']} of {pop['members']}",
        ]
    return "\n".join(lines) + "\n"
