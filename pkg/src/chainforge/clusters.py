"""Seed pruning, community detection, and the cluster shape taxonomy.

The analysis pipeline is:

1. ``prune`` — drop seed packages and their incident edges, collapse the
   version-sensitive graph to one directed package-level edge per
   (upstream, downstream) pair, and split off degree-zero nodes.
2. ``detect_communities`` — partition the non-isolated nodes with the
   Leiden scheme (undirected view, self-loops dropped for clustering).
3. ``classify_shape`` / ``cluster_metrics`` — label each community with
   a shape (Arrow, Star, Tree, Forest, Other) via a deterministic rule
   cascade and compute size, average degree, depth, roots, and core.
4. ``shape_report`` / ``build_cluster_report`` — aggregate summaries.

Edge direction convention: an edge (up, down) means ``down`` depends on
``up``; the dependency flows from upstream to its dependents.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from chainforge.chain import SupplyChainGraph
from chainforge.errors import DegenerateCluster, EmptyGraph
from chainforge.leiden import leiden

__all__ = [
    "Shape",
    "PrunedGraph",
    "Partition",
    "Cluster",
    "prune",
    "isolated_ratio",
    "detect_communities",
    "classify_shape",
    "cluster_metrics",
    "analyze_clusters",
    "shape_report",
    "build_cluster_report",
    "cluster_dot",
]

logger = logging.getLogger(__name__)


class Shape(str, Enum):
    ARROW = "arrow"
    STAR = "star"
    TREE = "tree"
    FOREST = "forest"
    OTHER = "other"


@dataclass(frozen=True)
class PrunedGraph:
    """Package-level directed graph with seeds removed."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    isolated: tuple[str, ...]


@dataclass(frozen=True)
class Partition:
    """Communities over the non-isolated nodes of a pruned graph."""

    communities: tuple[tuple[str, ...], ...]
    quality_history: tuple[float, ...]
    params: tuple[tuple[str, object], ...]

    def params_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class Cluster:
    id: int
    members: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    shape: Shape
    size: int
    avg_degree: float
    depth: int
    roots: tuple[str, ...]
    core: str

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "members": list(self.members),
            "shape": self.shape.value,
            "size": self.size,
            "avg_degree": self.avg_degree,
            "depth": self.depth,
            "roots": list(self.roots),
            "core": self.core,
        }


def prune(graph: SupplyChainGraph) -> PrunedGraph:
    """Remove seed nodes and incident edges; collapse to package level.

    Self-loops (a package's later version depending on an earlier
    version of itself) survive as self-edges. Nodes of degree zero are
    collected in ``isolated``; a self-loop counts as incident, so a
    node with only a self-loop is not isolated.
    """
    seeds = {node.name for node in graph.nodes.values() if node.is_seed}
    nodes = tuple(
        sorted(node.name for node in graph.nodes.values() if not node.is_seed)
    )
    edges = tuple(
        sorted(
            {
                (edge.up, edge.down)
                for edge in graph.edges.values()
                if edge.up not in seeds and edge.down not in seeds
            }
        )
    )
    touched = {endpoint for edge in edges for endpoint in edge}
    isolated = tuple(name for name in nodes if name not in touched)
    return PrunedGraph(nodes=nodes, edges=edges, isolated=isolated)


def isolated_ratio(pruned: PrunedGraph) -> float:
    """Fraction of pruned-graph nodes that have no edges at all."""
    if not pruned.nodes:
        raise EmptyGraph("pruned graph has no nodes")
    return len(pruned.isolated) / len(pruned.nodes)


def detect_communities(
    pruned: PrunedGraph,
    *,
    rng_seed: int = 0,
    resolution: float = 1.0,
    max_passes: int = 10,
) -> Partition:
    """Partition the non-isolated nodes of a pruned graph.

    Isolated nodes are excluded (reported separately); edges are taken
    as undirected and self-loops are dropped for the purpose of
    clustering. The result is deterministic for a fixed ``rng_seed``,
    every community induces a connected subgraph, and the recorded
    quality history is non-decreasing.
    """
    isolated = set(pruned.isolated)
    active = [name for name in pruned.nodes if name not in isolated]
    undirected = sorted(
        {(min(u, v), max(u, v)) for u, v in pruned.edges if u != v}
    )
    result = leiden(
        active,
        undirected,
        rng_seed=rng_seed,
        resolution=resolution,
        max_passes=max_passes,
    )

    flattened = [name for community in result.communities for name in community]
    assert sorted(flattened) == sorted(active), "partition must cover all non-isolated nodes"
    assert len(flattened) == len(set(flattened)), "communities must be disjoint"
    adjacency: dict[str, set[str]] = {name: set() for name in active}
    for u, v in undirected:
        adjacency[u].add(v)
        adjacency[v].add(u)
    for community in result.communities:
        assert _is_connected(community, adjacency), "communities must be connected"
    for earlier, later in zip(result.quality_history, result.quality_history[1:]):
        assert later >= earlier - 1e-12, "quality must be non-decreasing"

    return Partition(
        communities=result.communities,
        quality_history=result.quality_history,
        params=(
            ("rng_seed", rng_seed),
            ("resolution", resolution),
            ("max_passes", max_passes),
        ),
    )


def _is_connected(members: Sequence[str], adjacency: Mapping[str, set[str]]) -> bool:
    member_set = set(members)
    if len(member_set) <= 1:
        return True
    start = members[0]
    reached = {start}
    stack = [start]
    while stack:
        for neighbor in adjacency[stack.pop()] & member_set:
            if neighbor not in reached:
                reached.add(neighbor)
                stack.append(neighbor)
    return reached == member_set


def classify_shape(
    members: Iterable[str], edges: Iterable[tuple[str, str]]
) -> Shape:
    """Assign exactly one shape to a cluster subgraph.

    Rule cascade, in precedence order:

    1. any cycle, self-loop, or mutual pair -> Other;
    2. size 2 with a single edge -> Arrow;
    3. exactly one root (in-degree 0): Star when every edge originates
       at the root, otherwise Tree;
    4. multiple roots: Other when the edges form an inverse star
       (exactly one sink receiving one edge from every other member),
       otherwise Forest.

    Raises DegenerateCluster for a single member without a self-loop;
    valid partitions never produce one.
    """
    member_list = sorted(set(members))
    edge_set = {(u, v) for u, v in edges}
    for u, v in edge_set:
        if u not in member_list or v not in member_list:
            raise ValueError(f"edge ({u!r}, {v!r}) leaves the cluster")

    if len(member_list) == 1 and not edge_set:
        raise DegenerateCluster(member_list)

    if _has_cycle(member_list, edge_set):
        return Shape.OTHER

    if len(member_list) == 2 and len(edge_set) == 1:
        return Shape.ARROW

    in_degree = {name: 0 for name in member_list}
    for _, v in edge_set:
        in_degree[v] += 1
    roots = [name for name in member_list if in_degree[name] == 0]

    if len(roots) == 1:
        root = roots[0]
        if all(u == root for u, _ in edge_set):
            return Shape.STAR
        return Shape.TREE

    for sink in member_list:
        inverse_star = {(u, sink) for u in member_list if u != sink}
        if inverse_star and edge_set == inverse_star:
            return Shape.OTHER
    return Shape.FOREST


def _has_cycle(members: Sequence[str], edges: set[tuple[str, str]]) -> bool:
    """Directed cycle detection; a self-loop is a cycle of length 1."""
    if any(u == v for u, v in edges):
        return True
    out: dict[str, list[str]] = {name: [] for name in members}
    in_degree = {name: 0 for name in members}
    for u, v in edges:
        out[u].append(v)
        in_degree[v] += 1
    queue = [name for name in members if in_degree[name] == 0]
    removed = 0
    while queue:
        node = queue.pop()
        removed += 1
        for succ in out[node]:
            in_degree[succ] -= 1
            if in_degree[succ] == 0:
                queue.append(succ)
    return removed != len(members)


def cluster_metrics(
    members: Iterable[str],
    edges: Iterable[tuple[str, str]],
    shape: Shape | None = None,
) -> dict:
    """Size, average degree, depth, roots, and core package of a cluster.

    ``avg_degree`` counts self-loops as edges. ``depth`` is the longest
    directed path starting from any root; Other clusters report 0.
    ``core`` is the member with the most within-cluster direct
    dependents (maximum out-degree), ties broken by ascending name.
    """
    member_list = sorted(set(members))
    edge_set = {(u, v) for u, v in edges}
    if shape is None:
        shape = classify_shape(member_list, edge_set)

    size = len(member_list)
    avg_degree = len(edge_set) / size

    in_degree = {name: 0 for name in member_list}
    out_degree = {name: 0 for name in member_list}
    for u, v in edge_set:
        out_degree[u] += 1
        in_degree[v] += 1
    roots = tuple(name for name in member_list if in_degree[name] == 0)
    best_out = max(out_degree.values(), default=0)
    core = min(name for name in member_list if out_degree[name] == best_out)

    depth = 0 if shape is Shape.OTHER else _longest_path(member_list, edge_set)
    return {
        "size": size,
        "avg_degree": avg_degree,
        "depth": depth,
        "roots": roots,
        "core": core,
    }


def _longest_path(members: Sequence[str], edges: set[tuple[str, str]]) -> int:
    """Longest directed path length in a DAG (0 when edgeless)."""
    out: dict[str, list[str]] = {name: [] for name in members}
    in_degree = {name: 0 for name in members}
    for u, v in edges:
        out[u].append(v)
        in_degree[v] += 1
    order: list[str] = [name for name in members if in_degree[name] == 0]
    head = 0
    pending = dict(in_degree)
    while head < len(order):
        node = order[head]
        head += 1
        for succ in out[node]:
            pending[succ] -= 1
            if pending[succ] == 0:
                order.append(succ)
    assert len(order) == len(members), "longest path requires an acyclic cluster"
    distance = {name: 0 for name in members}
    for node in order:
        for succ in out[node]:
            if distance[node] + 1 > distance[succ]:
                distance[succ] = distance[node] + 1
    return max(distance.values(), default=0)


def analyze_clusters(
    partition: Partition, pruned: PrunedGraph
) -> list[Cluster]:
    """Classify every community and compute its metrics."""
    clusters = []
    for cluster_id, community in enumerate(partition.communities):
        member_set = set(community)
        induced = tuple(
            sorted(
                (u, v)
                for u, v in pruned.edges
                if u in member_set and v in member_set
            )
        )
        shape = classify_shape(community, induced)
        metrics = cluster_metrics(community, induced, shape)
        clusters.append(
            Cluster(
                id=cluster_id,
                members=tuple(sorted(community)),
                edges=induced,
                shape=shape,
                size=metrics["size"],
                avg_degree=metrics["avg_degree"],
                depth=metrics["depth"],
                roots=metrics["roots"],
                core=metrics["core"],
            )
        )
    return clusters


LARGE_CLUSTER_THRESHOLD = 10


def shape_report(clusters: Sequence[Cluster]) -> dict:
    """Per-shape counts, shares, degree medians, and large clusters."""
    total = len(clusters)
    summary: dict[str, dict] = {}
    for shape in Shape:
        shaped = [c for c in clusters if c.shape is shape]
        entry: dict = {
            "count": len(shaped),
            "percent": (100.0 * len(shaped) / total) if total else 0.0,
        }
        entry["median_avg_degree"] = (
            statistics.median(c.avg_degree for c in shaped) if shaped else None
        )
        if shape in (Shape.TREE, Shape.FOREST):
            entry["mean_depth"] = (
                statistics.fmean(c.depth for c in shaped) if shaped else None
            )
        summary[shape.value] = entry
    large = [
        {"id": c.id, "size": c.size, "shape": c.shape.value, "core": c.core}
        for c in clusters
        if c.size > LARGE_CLUSTER_THRESHOLD
    ]
    return {
        "total_clusters": total,
        "by_shape": summary,
        "large_clusters": large,
    }


def build_cluster_report(
    graph: SupplyChainGraph,
    *,
    rng_seed: int = 0,
    resolution: float = 1.0,
    max_passes: int = 10,
) -> dict:
    """Full cluster analysis of a supply-chain graph as a JSON-ready dict."""
    pruned = prune(graph)
    partition = detect_communities(
        pruned, rng_seed=rng_seed, resolution=resolution, max_passes=max_passes
    )
    clusters = analyze_clusters(partition, pruned)
    ratio = isolated_ratio(pruned) if pruned.nodes else None
    logger.info(
        "clusters: %d nodes -> %d clusters, %d isolated",
        len(pruned.nodes),
        len(clusters),
        len(pruned.isolated),
    )
    return {
        "params": dict(partition.params),
        "registry_hash": graph.registry_hash,
        "isolated": {
            "count": len(pruned.isolated),
            "ratio": ratio,
            "members": list(pruned.isolated),
        },
        "quality_history": list(partition.quality_history),
        "clusters": [cluster.as_dict() for cluster in clusters],
        "summary": shape_report(clusters),
    }


def cluster_dot(cluster: Cluster) -> str:
    """Render one cluster as a DOT digraph for visual inspection."""
    lines = [f'digraph cluster_{cluster.id} {{']
    lines.append(f'  label="cluster {cluster.id} ({cluster.shape.value})";')
    for name in cluster.members:
        attrs = ' [style=bold]' if name == cluster.core else ""
        lines.append(f'  "{name}"{attrs};')
    for u, v in cluster.edges:
        lines.append(f'  "{u}" -> "{v}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
