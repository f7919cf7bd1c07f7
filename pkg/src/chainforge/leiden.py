"""Community detection on undirected graphs.

Implements the Leiden scheme: a fast local-moving phase with a work
queue, a refinement phase that only merges singleton sub-communities
into adjacent groups inside their community, and graph aggregation,
repeated until the partition stabilizes. Quality is gamma-modularity

    Q = sum_c [ e_c / m - gamma * (d_c / 2m)^2 ]

computed on the original unweighted graph. A final repair step splits
any community that is not connected into its connected components,
which never lowers modularity, so the recorded quality history is
non-decreasing and every community induces a connected subgraph.

Determinism: for a fixed ``rng_seed`` the partition is identical across
runs; all tie-breaks favor the smallest community index.
"""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

__all__ = ["LeidenResult", "leiden", "modularity"]

logger = logging.getLogger(__name__)

_TOL = 1e-12


@dataclass(frozen=True)
class LeidenResult:
    communities: tuple[tuple[Hashable, ...], ...]
    membership: dict
    quality_history: tuple[float, ...]


def modularity(
    nodes: Sequence[Hashable],
    edges: Iterable[tuple[Hashable, Hashable]],
    communities: Iterable[Iterable[Hashable]],
    resolution: float = 1.0,
) -> float:
    """Gamma-modularity of a partition of an undirected simple graph."""
    index = {node: i for i, node in enumerate(nodes)}
    comm_of = {}
    for community_id, community in enumerate(communities):
        for node in community:
            comm_of[index[node]] = community_id
    degree = [0] * len(nodes)
    simple_edges = set()
    for u, v in edges:
        a, b = index[u], index[v]
        if a == b:
            continue
        simple_edges.add((min(a, b), max(a, b)))
    for a, b in simple_edges:
        degree[a] += 1
        degree[b] += 1
    m = len(simple_edges)
    if m == 0:
        return 0.0
    internal: dict[int, int] = {}
    comm_degree: dict[int, int] = {}
    for a, b in simple_edges:
        if comm_of[a] == comm_of[b]:
            internal[comm_of[a]] = internal.get(comm_of[a], 0) + 1
    for node, community_id in comm_of.items():
        comm_degree[community_id] = comm_degree.get(community_id, 0) + degree[node]
    quality = 0.0
    for community_id in comm_degree:
        e_c = internal.get(community_id, 0)
        d_c = comm_degree[community_id]
        quality += e_c / m - resolution * (d_c / (2.0 * m)) ** 2
    return quality


def leiden(
    nodes: Sequence[Hashable],
    edges: Iterable[tuple[Hashable, Hashable]],
    *,
    rng_seed: int = 0,
    resolution: float = 1.0,
    max_passes: int = 10,
) -> LeidenResult:
    """Partition ``nodes`` by the Leiden scheme.

    ``edges`` are undirected; duplicates and self-loops are ignored.
    Every returned community induces a connected subgraph; nodes without
    edges come back as singleton communities.
    """
    node_list = list(nodes)
    index = {node: i for i, node in enumerate(node_list)}
    n = len(node_list)
    simple: set[tuple[int, int]] = set()
    for u, v in edges:
        a, b = index[u], index[v]
        if a != b:
            simple.add((min(a, b), max(a, b)))
    neighbors: list[dict[int, float]] = [dict() for _ in range(n)]
    for a, b in sorted(simple):
        neighbors[a][b] = neighbors[a].get(b, 0.0) + 1.0
        neighbors[b][a] = neighbors[b].get(a, 0.0) + 1.0
    m = float(len(simple))

    if n == 0:
        return LeidenResult((), {}, (0.0,))
    if m == 0.0:
        communities = tuple((node,) for node in node_list)
        return LeidenResult(communities, {node: i for i, node in enumerate(node_list)}, (0.0,))

    rng = random.Random(rng_seed)

    # Aggregate-level state; level 0 is the input graph.
    agg_neighbors = neighbors
    agg_self = [0.0] * n
    agg_strength = [sum(nbrs.values()) for nbrs in agg_neighbors]
    node_agg = list(range(n))  # original node -> aggregate node

    flat_membership = list(range(n))
    history: list[float] = []
    induced: list[int] | None = None
    for _ in range(max_passes):
        comm, changed = _move_nodes(
            agg_neighbors, agg_strength, m, resolution, rng, init=induced
        )
        for original in range(n):
            flat_membership[original] = comm[node_agg[original]]
        history.append(_flat_quality(neighbors, flat_membership, m, resolution))
        n_agg = len(comm)
        if not changed and len(set(comm)) == n_agg:
            break  # fully coarsened and stable under single-node moves

        refined = _refine(
            agg_neighbors, agg_strength, comm, m, resolution, rng
        )
        (
            agg_neighbors,
            agg_self,
            agg_strength,
            group_of,
            induced,
        ) = _aggregate(agg_neighbors, agg_self, refined, comm)
        for original in range(n):
            node_agg[original] = group_of[node_agg[original]]
        if not changed and len(agg_neighbors) == n_agg:
            break  # no moves and no further coarsening possible

    flat_membership = _split_disconnected(neighbors, flat_membership)
    repaired_quality = _flat_quality(neighbors, flat_membership, m, resolution)
    if not history or repaired_quality > history[-1] + _TOL:
        history.append(repaired_quality)

    grouped: dict[int, list[Hashable]] = {}
    for original, community_id in enumerate(flat_membership):
        grouped.setdefault(community_id, []).append(node_list[original])
    communities = tuple(
        tuple(sorted(group)) for group in sorted(grouped.values(), key=lambda g: sorted(g)[0])
    )
    membership = {
        node: community_id
        for community_id, community in enumerate(communities)
        for node in community
    }
    logger.info(
        "leiden: %d nodes, %d edges -> %d communities (quality %.4f)",
        n,
        int(m),
        len(communities),
        history[-1],
    )
    return LeidenResult(communities, membership, tuple(history))


def _move_nodes(
    neighbors: list[dict[int, float]],
    strength: list[float],
    m: float,
    resolution: float,
    rng: random.Random,
    init: list[int] | None = None,
) -> tuple[list[int], bool]:
    """Queue-based local moving from ``init`` (singletons when omitted)."""
    n = len(neighbors)
    comm = list(range(n)) if init is None else list(init)
    tot: dict[int, float] = {}
    for v in range(n):
        tot[comm[v]] = tot.get(comm[v], 0.0) + strength[v]

    order = list(range(n))
    rng.shuffle(order)
    queue = deque(order)
    queued = [True] * n
    changed = False
    while queue:
        v = queue.popleft()
        queued[v] = False
        k_v = strength[v]
        weight_to: dict[int, float] = {}
        for u, w in neighbors[v].items():
            weight_to[comm[u]] = weight_to.get(comm[u], 0.0) + w
        current = comm[v]
        tot[current] -= k_v
        best_comm = current
        best_gain = weight_to.get(current, 0.0) - resolution * k_v * tot[current] / (2.0 * m)
        for candidate in sorted(weight_to):
            if candidate == current:
                continue
            gain = weight_to[candidate] - resolution * k_v * tot[candidate] / (2.0 * m)
            if gain > best_gain + _TOL:
                best_gain = gain
                best_comm = candidate
        tot[best_comm] = tot.get(best_comm, 0.0) + k_v
        comm[v] = best_comm
        if best_comm != current:
            changed = True
            for u in sorted(neighbors[v]):
                if comm[u] != best_comm and not queued[u]:
                    queue.append(u)
                    queued[u] = True
    return comm, changed


def _refine(
    neighbors: list[dict[int, float]],
    strength: list[float],
    comm: list[int],
    m: float,
    resolution: float,
    rng: random.Random,
) -> list[int]:
    """Merge singleton sub-communities into adjacent groups within each community."""
    n = len(neighbors)
    refined = list(range(n))
    refined_size = [1] * n
    refined_tot = strength.copy()

    by_comm: dict[int, list[int]] = {}
    for v in range(n):
        by_comm.setdefault(comm[v], []).append(v)

    for community_id in sorted(by_comm):
        members = by_comm[community_id]
        rng.shuffle(members)
        for v in members:
            if refined_size[refined[v]] > 1:
                continue
            k_v = strength[v]
            weight_to: dict[int, float] = {}
            for u, w in neighbors[v].items():
                if comm[u] == community_id and refined[u] != refined[v]:
                    weight_to[refined[u]] = weight_to.get(refined[u], 0.0) + w
            best_group = refined[v]
            best_gain = 0.0
            for group in sorted(weight_to):
                gain = weight_to[group] - resolution * k_v * refined_tot[group] / (2.0 * m)
                if gain > best_gain + _TOL:
                    best_gain = gain
                    best_group = group
            if best_group != refined[v]:
                refined_tot[best_group] += k_v
                refined_tot[refined[v]] -= k_v
                refined_size[best_group] += 1
                refined_size[refined[v]] -= 1
                refined[v] = best_group
    return refined


def _aggregate(
    neighbors: list[dict[int, float]],
    self_weight: list[float],
    refined: list[int],
    comm: list[int],
):
    """Collapse refined groups into aggregate nodes."""
    groups: dict[int, list[int]] = {}
    for v, group in enumerate(refined):
        groups.setdefault(group, []).append(v)
    ordered = sorted(groups.values(), key=min)
    group_of_old: dict[int, int] = {}
    for new_id, members in enumerate(ordered):
        for v in members:
            group_of_old[refined[v]] = new_id

    size = len(ordered)
    new_neighbors: list[dict[int, float]] = [dict() for _ in range(size)]
    new_self = [0.0] * size
    for new_id, members in enumerate(ordered):
        for v in members:
            new_self[new_id] += self_weight[v]
            for u, w in neighbors[v].items():
                target = group_of_old[refined[u]]
                if target == new_id:
                    if u > v:
                        new_self[new_id] += w
                else:
                    new_neighbors[new_id][target] = (
                        new_neighbors[new_id].get(target, 0.0) + w
                    )
    new_strength = [
        sum(nbrs.values()) + 2.0 * new_self[i] for i, nbrs in enumerate(new_neighbors)
    ]
    group_of = [group_of_old[refined[v]] for v in range(len(refined))]
    group_comm = [comm[members[0]] for members in ordered]
    return new_neighbors, new_self, new_strength, group_of, group_comm


def _flat_quality(
    neighbors: list[dict[int, float]],
    membership: list[int],
    m: float,
    resolution: float,
) -> float:
    internal: dict[int, float] = {}
    total: dict[int, float] = {}
    for v, nbrs in enumerate(neighbors):
        community_id = membership[v]
        strength = 0.0
        for u, w in nbrs.items():
            strength += w
            if membership[u] == community_id and u > v:
                internal[community_id] = internal.get(community_id, 0.0) + w
        total[community_id] = total.get(community_id, 0.0) + strength
    quality = 0.0
    for community_id in total:
        e_c = internal.get(community_id, 0.0)
        d_c = total[community_id]
        quality += e_c / m - resolution * (d_c / (2.0 * m)) ** 2
    return quality


def _split_disconnected(
    neighbors: list[dict[int, float]], membership: list[int]
) -> list[int]:
    """Split communities into connected components (never lowers quality)."""
    n = len(neighbors)
    result = [0] * n
    seen = [False] * n
    next_id = 0
    for start in range(n):
        if seen[start]:
            continue
        community_id = membership[start]
        stack = [start]
        seen[start] = True
        component = []
        while stack:
            v = stack.pop()
            component.append(v)
            for u in neighbors[v]:
                if not seen[u] and membership[u] == community_id:
                    seen[u] = True
                    stack.append(u)
        for v in component:
            result[v] = next_id
        next_id += 1
    return result
