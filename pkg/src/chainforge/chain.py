"""Version-sensitive supply-chain graphs.

Starting from a seed set, the builder expands the graph iteratively: a
seed participates with all of its released versions; every (package,
version) pair that joins the graph is queried once for its dependents,
and each discovered dependent joins with exactly the versions that
actually depend on a version already in the graph. Edges are keyed by
(upstream, downstream) package pair and carry ``rels``, a mapping from
upstream version to the downstream versions that depend on it.

The fixpoint is reached when no new (package, version) pair appears.
Because node-version merges are unions and edge merges only add rels
entries, the result is independent of seed order and traversal order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from xml.etree import ElementTree

from .depdb import DependencyDb
from .errors import FormatError, UnknownSeed, UnsupportedFormat
from .registry import Registry
from .requirements import normalize_name
from .versions import normalize, parse_version, sort_key

__all__ = [
    "PackageNode",
    "DependencyEdge",
    "SupplyChainGraph",
    "build_supply_chain",
    "graph_stats",
    "export_graph",
    "import_graph",
]

logger = logging.getLogger(__name__)

EXPORT_FORMATS = ("json", "edge-csv", "dot", "graphml")

_GRAPH_FORMAT = "chainforge-graph"
_GRAPH_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PackageNode:
    """A package in the supply chain with the versions that participate."""

    name: str
    vs: tuple[str, ...]       # participating versions, ascending
    is_seed: bool


@dataclass(frozen=True)
class DependencyEdge:
    """Aggregated dependency facts from one upstream package to one dependent."""

    up: str
    down: str
    # upstream version -> downstream versions that depend on it (ascending)
    rels: tuple[tuple[str, tuple[str, ...]], ...]

    def rels_dict(self) -> dict[str, tuple[str, ...]]:
        return dict(self.rels)


@dataclass
class SupplyChainGraph:
    nodes: dict[str, PackageNode]
    edges: dict[tuple[str, str], DependencyEdge]
    seeds: tuple[str, ...]
    registry_hash: str | None = None
    db_manifest: dict | None = None
    built_at: str | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SupplyChainGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.edges == other.edges
            and self.seeds == other.seeds
            and self.registry_hash == other.registry_hash
        )


def build_supply_chain(
    db: DependencyDb,
    registry: Registry,
    seeds: list[str],
    *,
    on_missing_seed: str = "error",
    built_at: str | None = None,
) -> SupplyChainGraph:
    """Expand the version-sensitive supply chain of ``seeds``.

    Every seed must exist in the registry; ``on_missing_seed="skip"``
    downgrades that to a warning. The output is independent of seed
    order and of the order dependents are discovered in.
    """
    if on_missing_seed not in ("error", "skip"):
        raise ValueError("on_missing_seed must be 'error' or 'skip'")

    seed_names = sorted({normalize_name(s) for s in seeds})
    node_versions: dict[str, set[str]] = {}
    edge_rels: dict[tuple[str, str], dict[str, set[str]]] = {}

    kept_seeds: list[str] = []
    frontier: set[tuple[str, str]] = set()
    for seed in seed_names:
        versions = registry.get_all_versions(seed)
        if not versions:
            if on_missing_seed == "error":
                raise UnknownSeed(seed)
            logger.warning("seed %r not in registry; skipped", seed)
            continue
        kept_seeds.append(seed)
        ids = {normalize(v) for v in versions}
        node_versions[seed] = set(ids)
        frontier.update((seed, version_id) for version_id in ids)

    visited: set[tuple[str, str]] = set(frontier)
    while frontier:
        next_frontier: set[tuple[str, str]] = set()
        for name, version_id in sorted(frontier):
            for down_name, down_versions in db.get_dependents(name, version_id):
                rels = edge_rels.setdefault((name, down_name), {}).setdefault(
                    version_id, set()
                )
                down_bucket = node_versions.setdefault(down_name, set())
                for down_version in down_versions:
                    down_id = normalize(down_version)
                    rels.add(down_id)
                    down_bucket.add(down_id)
                    pair = (down_name, down_id)
                    if pair not in visited:
                        visited.add(pair)
                        next_frontier.add(pair)
        frontier = next_frontier

    graph = SupplyChainGraph(
        nodes={
            name: PackageNode(
                name=name,
                vs=tuple(_sorted_ids(ids)),
                is_seed=name in kept_seeds,
            )
            for name, ids in sorted(node_versions.items())
        },
        edges={
            (up, down): DependencyEdge(
                up=up,
                down=down,
                rels=tuple(
                    (up_id, tuple(_sorted_ids(down_ids)))
                    for up_id, down_ids in sorted(
                        rels.items(), key=lambda item: _id_key(item[0])
                    )
                ),
            )
            for (up, down), rels in sorted(edge_rels.items())
        },
        seeds=tuple(kept_seeds),
        registry_hash=registry.content_hash(),
        db_manifest=db.manifest or None,
        built_at=built_at,
    )
    _check_postconditions(graph)
    stats = graph_stats(graph)
    logger.info(
        "supply chain built: %d packages, %d versions, %d edges",
        stats["packages"],
        stats["versions"],
        stats["edges"],
    )
    return graph


def _id_key(version_id: str) -> tuple:
    return sort_key(parse_version(version_id))


def _sorted_ids(ids) -> list[str]:
    return sorted(ids, key=_id_key)


def _check_postconditions(graph: SupplyChainGraph) -> None:
    """Closure and consistency invariants; violations are internal bugs."""
    for (up, down), edge in graph.edges.items():
        assert up in graph.nodes and down in graph.nodes, "edge endpoint missing"
        up_versions = set(graph.nodes[up].vs)
        down_versions = set(graph.nodes[down].vs)
        for up_id, down_ids in edge.rels:
            assert up_id in up_versions, f"rels key {up}=={up_id} not a node version"
            assert down_ids, f"empty rels bucket on {up}->{down}"
            assert set(down_ids) <= down_versions, "rels value not a node version"
    for name, node in graph.nodes.items():
        assert node.vs, f"node {name} carries no versions"
        if node.is_seed:
            continue
        # Every non-seed version got here through some dependency fact.
        reached = {
            down_id
            for (_, down), edge in graph.edges.items()
            if down == name
            for _, down_ids in edge.rels
            for down_id in down_ids
        }
        assert set(node.vs) <= reached, f"unreachable versions on {name}"


def graph_stats(graph: SupplyChainGraph) -> dict:
    """Package, version-node and edge counts."""
    return {
        "packages": len(graph.nodes),
        "versions": sum(len(node.vs) for node in graph.nodes.values()),
        "edges": len(graph.edges),
    }


# --- serialization ------------------------------------------------------------


def export_graph(graph: SupplyChainGraph, fmt: str = "json") -> bytes:
    """Serialize the graph.

    ``json`` is lossless; ``edge-csv`` lists one version-level dependency
    fact per row; ``dot`` and ``graphml`` are package-granularity views.
    """
    if fmt == "json":
        return _to_json(graph)
    if fmt == "edge-csv":
        return _to_edge_csv(graph)
    if fmt == "dot":
        return _to_dot(graph)
    if fmt == "graphml":
        return _to_graphml(graph)
    raise UnsupportedFormat(fmt, EXPORT_FORMATS)


def import_graph(data: bytes | str | dict) -> SupplyChainGraph:
    """Rebuild a graph from its lossless JSON export."""
    if isinstance(data, (bytes, str)):
        try:
            payload = json.loads(data)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not a graph export: {exc}") from exc
    else:
        payload = data
    if not isinstance(payload, dict) or payload.get("format") != _GRAPH_FORMAT:
        raise FormatError("not a supply-chain graph export")
    if payload.get("schema") != _GRAPH_SCHEMA_VERSION:
        raise FormatError(f"unsupported graph schema: {payload.get('schema')!r}")
    try:
        nodes = {
            item["name"]: PackageNode(
                name=item["name"],
                vs=tuple(item["vs"]),
                is_seed=bool(item["is_seed"]),
            )
            for item in payload["nodes"]
        }
        edges = {
            (item["up"], item["down"]): DependencyEdge(
                up=item["up"],
                down=item["down"],
                rels=tuple(
                    (up_id, tuple(down_ids))
                    for up_id, down_ids in sorted(
                        item["rels"].items(), key=lambda kv: _id_key(kv[0])
                    )
                ),
            )
            for item in payload["edges"]
        }
        return SupplyChainGraph(
            nodes=nodes,
            edges=edges,
            seeds=tuple(payload["seeds"]),
            registry_hash=payload.get("registry_hash"),
            db_manifest=payload.get("db_manifest"),
            built_at=payload.get("built_at"),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed graph export: {exc!r}") from exc


def _to_json(graph: SupplyChainGraph) -> bytes:
    payload = {
        "format": _GRAPH_FORMAT,
        "schema": _GRAPH_SCHEMA_VERSION,
        "seeds": list(graph.seeds),
        "registry_hash": graph.registry_hash,
        "db_manifest": graph.db_manifest,
        "built_at": graph.built_at,
        "stats": graph_stats(graph),
        "nodes": [
            {"name": node.name, "vs": list(node.vs), "is_seed": node.is_seed}
            for _, node in sorted(graph.nodes.items())
        ],
        "edges": [
            {
                "up": edge.up,
                "down": edge.down,
                "rels": {up_id: list(down_ids) for up_id, down_ids in edge.rels},
            }
            for _, edge in sorted(graph.edges.items())
        ],
    }
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _to_edge_csv(graph: SupplyChainGraph) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["up", "down", "up_version", "down_version"])
    for _, edge in sorted(graph.edges.items()):
        for up_id, down_ids in edge.rels:
            for down_id in down_ids:
                writer.writerow([edge.up, edge.down, up_id, down_id])
    return buffer.getvalue().encode("utf-8")


def _quote_dot(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _to_dot(graph: SupplyChainGraph) -> bytes:
    lines = ["digraph supply_chain {"]
    for name, node in sorted(graph.nodes.items()):
        attrs = " [shape=box]" if node.is_seed else ""
        lines.append(f"  {_quote_dot(name)}{attrs};")
    for up, down in sorted(graph.edges):
        lines.append(f"  {_quote_dot(up)} -> {_quote_dot(down)};")
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _to_graphml(graph: SupplyChainGraph) -> bytes:
    root = ElementTree.Element(
        "graphml", xmlns="http://graphml.graphdrawing.org/xmlns"
    )
    key = ElementTree.SubElement(root, "key")
    key.set("id", "d0")
    key.set("for", "node")
    key.set("attr.name", "is_seed")
    key.set("attr.type", "boolean")
    container = ElementTree.SubElement(root, "graph", id="supply_chain", edgedefault="directed")
    for name, node in sorted(graph.nodes.items()):
        element = ElementTree.SubElement(container, "node", id=name)
        data = ElementTree.SubElement(element, "data", key="d0")
        data.text = "true" if node.is_seed else "false"
    for up, down in sorted(graph.edges):
        ElementTree.SubElement(container, "edge", source=up, target=down)
    ElementTree.indent(root)
    return ElementTree.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"
