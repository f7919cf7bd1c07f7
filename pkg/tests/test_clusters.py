"""Cluster-engine tests: pruning, shape taxonomy, metrics, reporting."""

from __future__ import annotations

import itertools
import json
import random

import pytest

from chainforge.chain import DependencyEdge, PackageNode, SupplyChainGraph
from chainforge.clusters import (
    Cluster,
    Shape,
    analyze_clusters,
    build_cluster_report,
    classify_shape,
    cluster_dot,
    cluster_metrics,
    detect_communities,
    isolated_ratio,
    prune,
    shape_report,
)
from chainforge.errors import DegenerateCluster, EmptyGraph


def make_graph(nodes, edges, seeds=()):
    """Assemble a SupplyChainGraph literal for pruning tests.

    ``nodes``: list of (name, versions, is_seed); ``edges``: list of
    (up, down, {up_version: [down_versions]}).
    """
    graph_nodes = {
        name: PackageNode(name=name, vs=tuple(vs), is_seed=is_seed)
        for name, vs, is_seed in sorted(nodes)
    }
    graph_edges = {
        (up, down): DependencyEdge(
            up=up,
            down=down,
            rels=tuple(
                (up_v, tuple(down_vs)) for up_v, down_vs in sorted(rels.items())
            ),
        )
        for up, down, rels in sorted(edges, key=lambda e: (e[0], e[1]))
    }
    return SupplyChainGraph(
        nodes=graph_nodes,
        edges=graph_edges,
        seeds=tuple(sorted(seeds)),
        registry_hash="test-hash",
        db_manifest={},
        built_at="2021-11-04T00:00:00+00:00",
    )


def mk_pruned(nodes, edges):
    from chainforge.clusters import PrunedGraph

    touched = {endpoint for edge in edges for endpoint in edge}
    isolated = tuple(sorted(n for n in nodes if n not in touched))
    return PrunedGraph(
        nodes=tuple(sorted(nodes)), edges=tuple(sorted(edges)), isolated=isolated
    )


# ---------------------------------------------------------------------------
# prune / isolated_ratio


def test_prune_star_of_seed_leaves_isolated_nodes():
    graph = make_graph(
        nodes=[("seed", ["1.0"], True)]
        + [(f"d{i}", ["1.0"], False) for i in range(4)],
        edges=[(f"seed", f"d{i}", {"1.0": ["1.0"]}) for i in range(4)],
        seeds=["seed"],
    )
    pruned = prune(graph)
    assert pruned.nodes == ("d0", "d1", "d2", "d3")
    assert pruned.edges == ()
    assert pruned.isolated == ("d0", "d1", "d2", "d3")
    assert isolated_ratio(pruned) == 1.0


def test_prune_chain_keeps_non_seed_edge():
    graph = make_graph(
        nodes=[("seed", ["1.0"], True), ("a", ["1.0"], False), ("b", ["1.0"], False)],
        edges=[
            ("seed", "a", {"1.0": ["1.0"]}),
            ("a", "b", {"1.0": ["1.0"]}),
        ],
        seeds=["seed"],
    )
    pruned = prune(graph)
    assert pruned.nodes == ("a", "b")
    assert pruned.edges == (("a", "b"),)
    assert pruned.isolated == ()
    assert isolated_ratio(pruned) == 0.0


def test_prune_collapses_version_detail_and_keeps_self_loops():
    graph = make_graph(
        nodes=[
            ("seed", ["1.0"], True),
            ("a", ["1.0", "2.0"], False),
            ("b", ["1.0", "2.0", "3.0"], False),
        ],
        edges=[
            ("seed", "a", {"1.0": ["1.0", "2.0"]}),
            # two versioned relations collapse into one package edge
            ("a", "b", {"1.0": ["1.0"], "2.0": ["2.0", "3.0"]}),
            # b's later versions depend on an earlier b
            ("b", "b", {"1.0": ["2.0", "3.0"]}),
        ],
        seeds=["seed"],
    )
    pruned = prune(graph)
    assert pruned.nodes == ("a", "b")
    assert pruned.edges == (("a", "b"), ("b", "b"))
    # the self-loop means b has an incident edge, so nothing is isolated
    assert pruned.isolated == ()


def test_prune_drops_edges_touching_any_seed():
    graph = make_graph(
        nodes=[
            ("s1", ["1.0"], True),
            ("s2", ["1.0"], True),
            ("x", ["1.0"], False),
        ],
        edges=[
            ("s1", "s2", {"1.0": ["1.0"]}),
            ("s1", "x", {"1.0": ["1.0"]}),
            ("x", "s2", {"1.0": ["1.0"]}),
        ],
        seeds=["s1", "s2"],
    )
    pruned = prune(graph)
    assert pruned.nodes == ("x",)
    assert pruned.edges == ()
    assert pruned.isolated == ("x",)


def test_isolated_ratio_requires_nodes():
    with pytest.raises(EmptyGraph):
        isolated_ratio(mk_pruned([], []))


def test_isolated_ratio_mixed():
    pruned = mk_pruned(["a", "b", "c", "d"], [("a", "b")])
    assert isolated_ratio(pruned) == 0.5


# ---------------------------------------------------------------------------
# detect_communities


def test_detect_communities_two_cliques_package_level():
    left = ["la", "lb", "lc", "ld"]
    right = ["ra", "rb", "rc", "rd"]
    edges = (
        [(a, b) for a, b in itertools.combinations(left, 2)]
        + [(a, b) for a, b in itertools.combinations(right, 2)]
        + [("ld", "ra")]
    )
    partition = detect_communities(mk_pruned(left + right, edges))
    assert {frozenset(c) for c in partition.communities} == {
        frozenset(left),
        frozenset(right),
    }
    assert partition.params_dict() == {
        "rng_seed": 0,
        "resolution": 1.0,
        "max_passes": 10,
    }


def test_detect_communities_excludes_isolated_and_handles_edgeless():
    partition = detect_communities(mk_pruned(["a", "b", "c"], []))
    assert partition.communities == ()
    assert partition.quality_history == (0.0,)


def test_detect_communities_keeps_self_loop_node_as_singleton():
    # only a self-loop: the node is not isolated, but its loop is
    # dropped for clustering, leaving a singleton community
    partition = detect_communities(
        mk_pruned(["solo", "x", "y"], [("solo", "solo"), ("x", "y")])
    )
    assert {frozenset(c) for c in partition.communities} == {
        frozenset({"solo"}),
        frozenset({"x", "y"}),
    }


def test_detect_communities_deterministic():
    rng = random.Random(3)
    nodes = [f"n{i}" for i in range(20)]
    edges = [
        (a, b) for a, b in itertools.combinations(nodes, 2) if rng.random() < 0.2
    ]
    pruned = mk_pruned(nodes, edges)
    assert detect_communities(pruned, rng_seed=5) == detect_communities(
        pruned, rng_seed=5
    )


# ---------------------------------------------------------------------------
# classify_shape — frozen fixtures


def test_arrow_two_packages_one_dependency():
    members = ["deeplabcut-live", "deeplabcut-live-gui"]
    edges = [("deeplabcut-live", "deeplabcut-live-gui")]
    assert classify_shape(members, edges) is Shape.ARROW


def test_star_root_with_direct_dependents_only():
    members = ["txtai", "paperai", "codequestion", "tldrstory"]
    edges = [("txtai", "paperai"), ("txtai", "codequestion"), ("txtai", "tldrstory")]
    assert classify_shape(members, edges) is Shape.STAR


def test_tree_single_root_with_transitive_dependents():
    members = ["pgmpy", "d1", "d2", "d3", "d4", "d5"]
    edges = [
        ("pgmpy", "d1"),
        ("pgmpy", "d2"),
        ("d1", "d3"),
        ("d2", "d4"),
        ("d4", "d5"),
    ]
    assert classify_shape(members, edges) is Shape.TREE


def test_forest_multiple_roots():
    roots = ["malaya", "underthesea", "g2p-en"]
    dependents = [f"pkg{i:02d}" for i in range(13)]
    edges = []
    for i, dep in enumerate(dependents):
        edges.append((roots[i % 3], dep))
    edges.append(("pkg00", "pkg05"))
    assert classify_shape(roots + dependents, edges) is Shape.FOREST


def test_other_self_loop_singleton():
    assert classify_shape(["solo"], [("solo", "solo")]) is Shape.OTHER


def test_other_mutual_pair():
    assert classify_shape(["a", "b"], [("a", "b"), ("b", "a")]) is Shape.OTHER


def test_other_inverse_star():
    members = ["sink", "s1", "s2", "s3", "s4"]
    edges = [(s, "sink") for s in ["s1", "s2", "s3", "s4"]]
    assert classify_shape(members, edges) is Shape.OTHER


def test_other_longer_cycle():
    assert (
        classify_shape(["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "a")])
        is Shape.OTHER
    )


def test_cycle_rule_beats_arrow_rule():
    # a mutual pair is size 2 but rule 1 wins
    assert classify_shape(["a", "b"], [("a", "b"), ("b", "a")]) is Shape.OTHER


def test_inverse_star_of_two_is_arrow():
    # size 2 with one edge hits the Arrow rule before the sink check
    assert classify_shape(["a", "b"], [("a", "b")]) is Shape.ARROW


def test_degenerate_singleton_raises():
    with pytest.raises(DegenerateCluster):
        classify_shape(["lonely"], [])


def test_edge_outside_cluster_rejected():
    with pytest.raises(ValueError):
        classify_shape(["a", "b"], [("a", "z")])


def test_two_sinks_with_multiple_roots_is_forest():
    members = ["r1", "r2", "t1", "t2"]
    edges = [("r1", "t1"), ("r2", "t2")]
    assert classify_shape(members, edges) is Shape.FOREST


def test_almost_inverse_star_is_forest():
    # one source also feeds a second target: not an inverse star
    members = ["sink", "s1", "s2", "s3"]
    edges = [("s1", "sink"), ("s2", "sink"), ("s3", "sink"), ("s1", "s2")]
    # s1 -> s2 gives s2 in-degree 1, so roots = {s1, s3}; still many roots
    assert classify_shape(members, edges) is Shape.FOREST


# ---------------------------------------------------------------------------
# classify_shape — totality over random digraphs


def test_shape_totality_on_random_digraphs():
    rng = random.Random(2024)
    for _ in range(300):
        n = rng.randint(1, 8)
        members = [f"p{i}" for i in range(n)]
        possible = [(a, b) for a in members for b in members]
        edges = [e for e in possible if rng.random() < 0.25]
        if n == 1 and not edges:
            with pytest.raises(DegenerateCluster):
                classify_shape(members, edges)
            continue
        shape = classify_shape(members, edges)
        assert isinstance(shape, Shape)


def test_shape_of_random_dags_is_never_other_unless_inverse_star():
    rng = random.Random(99)
    for _ in range(200):
        n = rng.randint(2, 8)
        members = [f"p{i}" for i in range(n)]
        edges = [
            (members[i], members[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < 0.3
        ]
        shape = classify_shape(members, edges)
        if shape is Shape.OTHER:
            sinks = {v for _, v in edges}
            assert len(sinks) == 1
            sink = sinks.pop()
            assert set(edges) == {(u, sink) for u in members if u != sink}


# ---------------------------------------------------------------------------
# cluster_metrics


def test_metrics_arrow():
    metrics = cluster_metrics(["a", "b"], [("a", "b")], Shape.ARROW)
    assert metrics == {
        "size": 2,
        "avg_degree": 0.5,
        "depth": 1,
        "roots": ("a",),
        "core": "a",
    }


def test_metrics_star_four_nodes():
    members = ["txtai", "paperai", "codequestion", "tldrstory"]
    edges = [("txtai", "paperai"), ("txtai", "codequestion"), ("txtai", "tldrstory")]
    metrics = cluster_metrics(members, edges)
    assert metrics["size"] == 4
    assert metrics["avg_degree"] == 0.75
    assert metrics["depth"] == 1
    assert metrics["roots"] == ("txtai",)
    assert metrics["core"] == "txtai"


def test_metrics_chain_depth_two():
    metrics = cluster_metrics(["r", "a", "b"], [("r", "a"), ("a", "b")])
    assert metrics["size"] == 3
    assert metrics["avg_degree"] == pytest.approx(2 / 3)
    assert metrics["depth"] == 2
    assert metrics["roots"] == ("r",)
    # r and a both have one direct dependent; ties break by name
    assert metrics["core"] == "a"


def test_metrics_other_reports_depth_zero():
    members = ["sink", "s1", "s2", "s3", "s4"]
    edges = [(s, "sink") for s in ["s1", "s2", "s3", "s4"]]
    metrics = cluster_metrics(members, edges)
    assert metrics["depth"] == 0
    assert metrics["core"] == "s1"  # all sources tie at out-degree 1


def test_metrics_self_loop_counted_in_degree():
    metrics = cluster_metrics(["solo"], [("solo", "solo")])
    assert metrics["avg_degree"] == 1.0
    assert metrics["depth"] == 0
    assert metrics["core"] == "solo"


def test_metric_invariants_on_random_dags():
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(2, 9)
        members = [f"p{i}" for i in range(n)]
        edges = [
            (members[i], members[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < 0.3
        ]
        shape = classify_shape(members, edges)
        metrics = cluster_metrics(members, edges, shape)
        assert metrics["avg_degree"] == len(set(edges)) / n
        if shape is Shape.ARROW:
            assert metrics["avg_degree"] == 0.5
        if shape is Shape.STAR:
            assert metrics["avg_degree"] == (n - 1) / n
            assert metrics["depth"] == 1
        if shape in (Shape.TREE, Shape.FOREST) and edges:
            assert metrics["depth"] >= 1
        if shape is Shape.OTHER:
            assert metrics["depth"] == 0


# ---------------------------------------------------------------------------
# shape_report / analyze_clusters / build_cluster_report


def _cluster(cluster_id, members, edges):
    shape = classify_shape(members, edges)
    metrics = cluster_metrics(members, edges, shape)
    return Cluster(
        id=cluster_id,
        members=tuple(sorted(members)),
        edges=tuple(sorted(edges)),
        shape=shape,
        size=metrics["size"],
        avg_degree=metrics["avg_degree"],
        depth=metrics["depth"],
        roots=metrics["roots"],
        core=metrics["core"],
    )


def test_shape_report_hand_computed():
    clusters = [
        _cluster(0, ["a", "b"], [("a", "b")]),                      # arrow, 0.5
        _cluster(1, ["c", "d"], [("c", "d")]),                      # arrow, 0.5
        _cluster(2, ["r", "x", "y"], [("r", "x"), ("r", "y")]),     # star, 2/3
        _cluster(3, ["t", "u", "v"], [("t", "u"), ("u", "v")]),     # tree, depth 2
    ]
    report = shape_report(clusters)
    assert report["total_clusters"] == 4
    assert report["by_shape"]["arrow"] == {
        "count": 2,
        "percent": 50.0,
        "median_avg_degree": 0.5,
    }
    assert report["by_shape"]["star"]["count"] == 1
    assert report["by_shape"]["star"]["median_avg_degree"] == pytest.approx(2 / 3)
    assert report["by_shape"]["tree"]["mean_depth"] == 2.0
    assert report["by_shape"]["forest"] == {
        "count": 0,
        "percent": 0.0,
        "median_avg_degree": None,
        "mean_depth": None,
    }
    assert report["large_clusters"] == []


def test_shape_report_lists_large_clusters():
    members = [f"m{i:02d}" for i in range(12)]
    edges = [("m00", m) for m in members[1:]]
    clusters = [_cluster(0, members, edges)]
    report = shape_report(clusters)
    assert report["large_clusters"] == [
        {"id": 0, "size": 12, "shape": "star", "core": "m00"}
    ]


def test_analyze_clusters_induces_edges():
    pruned = mk_pruned(
        ["a", "b", "c", "d"],
        [("a", "b"), ("c", "d"), ("a", "a")],
    )
    partition = detect_communities(pruned)
    clusters = analyze_clusters(partition, pruned)
    by_members = {c.members: c for c in clusters}
    assert by_members[("a", "b")].edges == (("a", "a"), ("a", "b"))
    assert by_members[("a", "b")].shape is Shape.OTHER  # self-loop
    assert by_members[("c", "d")].shape is Shape.ARROW


def test_build_cluster_report_end_to_end():
    graph = make_graph(
        nodes=[
            ("seed", ["1.0"], True),
            ("a", ["1.0"], False),
            ("b", ["1.0"], False),
            ("c", ["1.0"], False),
            ("lone", ["1.0"], False),
        ],
        edges=[
            ("seed", "a", {"1.0": ["1.0"]}),
            ("seed", "lone", {"1.0": ["1.0"]}),
            ("a", "b", {"1.0": ["1.0"]}),
            ("a", "c", {"1.0": ["1.0"]}),
        ],
        seeds=["seed"],
    )
    report = build_cluster_report(graph)
    assert report["registry_hash"] == "test-hash"
    assert report["isolated"] == {"count": 1, "ratio": 0.25, "members": ["lone"]}
    assert len(report["clusters"]) == 1
    only = report["clusters"][0]
    assert only["members"] == ["a", "b", "c"]
    assert only["shape"] == "star"
    assert only["core"] == "a"
    assert report["summary"]["by_shape"]["star"]["count"] == 1
    # deterministic and JSON-serializable
    assert json.dumps(report, sort_keys=True) == json.dumps(
        build_cluster_report(graph), sort_keys=True
    )


def test_build_cluster_report_seeds_only_graph():
    graph = make_graph(
        nodes=[("seed", ["1.0", "2.0"], True)], edges=[], seeds=["seed"]
    )
    report = build_cluster_report(graph)
    assert report["isolated"] == {"count": 0, "ratio": None, "members": []}
    assert report["clusters"] == []
    assert report["summary"]["total_clusters"] == 0


def test_cluster_dot_render():
    cluster = _cluster(3, ["a", "b"], [("a", "b")])
    dot = cluster_dot(cluster)
    assert dot.startswith("digraph cluster_3 {")
    assert '"a" -> "b";' in dot
    assert '"a" [style=bold];' in dot  # the core package is highlighted
    assert dot.endswith("}\n")
