"""chainforge: package supply-chain analysis toolkit.

Parse registry metadata, resolve version-sensitive dependency
relations, grow seed-rooted supply-chain graphs, cluster and classify
their structure, and track package disengagement over time.
"""

from chainforge.chain import (
    DependencyEdge,
    PackageNode,
    SupplyChainGraph,
    build_supply_chain,
    export_graph,
    graph_stats,
    import_graph,
)
from chainforge.clusters import (
    Cluster,
    Partition,
    PrunedGraph,
    Shape,
    build_cluster_report,
    classify_shape,
    cluster_metrics,
    detect_communities,
    isolated_ratio,
    prune,
    shape_report,
)
from chainforge.depdb import DependencyDb, DepRecord, build_dependency_db
from chainforge.dynamics import (
    DisengagementRecord,
    DownloadsTable,
    build_disengagement_report,
    detect_disengaged,
    holm_bonferroni,
    load_downloads_csv,
    mann_whitney_u,
    popular_packages,
    proportion_z_test,
    quarterly_trend,
)
from chainforge.errors import ChainforgeError
from chainforge.leiden import leiden, modularity
from chainforge.registry import Registry, ReleaseRecord, ingest, ingest_path
from chainforge.requirements import (
    Requirement,
    SpecifierSet,
    matches,
    normalize_name,
    parse_requirement,
    parse_specifier_set,
    satisfying_versions,
)
from chainforge.versions import (
    Version,
    compare,
    normalize,
    parse_version,
    sort_key,
    sorted_versions,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ChainforgeError",
    # versions
    "Version",
    "parse_version",
    "normalize",
    "compare",
    "sort_key",
    "sorted_versions",
    # requirements
    "Requirement",
    "SpecifierSet",
    "normalize_name",
    "parse_requirement",
    "parse_specifier_set",
    "matches",
    "satisfying_versions",
    # registry
    "Registry",
    "ReleaseRecord",
    "ingest",
    "ingest_path",
    # dependency database
    "DependencyDb",
    "DepRecord",
    "build_dependency_db",
    # supply chain
    "SupplyChainGraph",
    "PackageNode",
    "DependencyEdge",
    "build_supply_chain",
    "graph_stats",
    "export_graph",
    "import_graph",
    # clusters
    "PrunedGraph",
    "Partition",
    "Cluster",
    "Shape",
    "prune",
    "isolated_ratio",
    "detect_communities",
    "classify_shape",
    "cluster_metrics",
    "shape_report",
    "build_cluster_report",
    "leiden",
    "modularity",
    # dynamics
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
