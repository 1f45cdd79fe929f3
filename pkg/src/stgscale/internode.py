"""Cross-cluster rebalancing and per-node library assembly.

``rebalance`` runs a deterministic first-improvement hill climb over
single-op boundary moves between adjacent clusters; ``build_library``
assembles the final implementation library for every node of an
application, passing user-supplied entries through verbatim.
"""

from __future__ import annotations

from stgscale.errors import StructuralError
from stgscale.intranode import (
    ClusterPartition,
    cluster_impl,
    enumerate_implementations,
    make_partition,
)
from stgscale.model import (
    Application,
    Implementation,
    ImplementationLibrary,
    OpGraph,
    is_pareto_clean,
)


def _moves(bounds, n):
    """Candidate single-op boundary moves, scanned left to right.

    Each move shifts one boundary: the last op of cluster i joins cluster
    i+1, or the first op of cluster i+1 joins cluster i. Moves that would
    empty a cluster are skipped.
    """
    for i in range(len(bounds) - 1):
        lo = bounds[i - 1] if i > 0 else 0
        if bounds[i] - lo > 1:            # shift last op of cluster i right
            yield i, bounds[i] - 1
        if bounds[i + 1] - bounds[i] > 1:  # shift first op of cluster i+1 left
            yield i, bounds[i] + 1


def rebalance(p: ClusterPartition) -> ClusterPartition:
    """Hill-climb boundary moves; accept the first move that strictly lowers
    the maximum cluster load, restart the scan, stop at a local optimum."""
    current = p
    improved = True
    while improved:
        improved = False
        for i, new_bound in _moves(current.bounds, len(current.order)):
            bounds = list(current.bounds)
            bounds[i] = new_bound
            candidate = current.with_bounds(bounds)
            if candidate.ii < current.ii:
                current = candidate
                improved = True
                break
    return current


def build_library(app: Application, nf: int = 4,
                  supplied: ImplementationLibrary | None = None
                  ) -> ImplementationLibrary:
    """Per-node implementation lists, document order, each Pareto-clean and
    sorted by ascending initiation interval.

    Nodes with user-supplied entries keep them verbatim (after a sanity
    check); the rest are enumerated from their op graph, with every
    clustered point re-checked by the boundary rebalancer.
    """
    entries = []
    for node in app.nodes:
        if supplied is not None and supplied.has(node.id) and supplied.get(node.id):
            impls = list(supplied.get(node.id))
            impls.sort(key=lambda im: im.ii)
            if not is_pareto_clean(impls):
                raise StructuralError(
                    f"user library for {node.id!r} contains dominated entries")
            entries.append((node.id, tuple(impls)))
            continue
        if node.op_graph is None:
            raise StructuralError(
                f"node {node.id!r} has neither an op graph nor library entries")
        impls = enumerate_implementations(node.op_graph, nf, node.id)
        checked = []
        for impl in impls:
            if impl.provenance == "clustered":
                bounds = impl.detail[1]
                part = rebalance(make_partition(node.op_graph, bounds))
                if part.ii < impl.ii:  # pragma: no cover - DP is already optimal
                    impl = Implementation(node.id, impl.version_tag, impl.area,
                                          part.ii, "clustered",
                                          latency=impl.latency,
                                          detail=("cluster", part.bounds))
            checked.append(impl)
        entries.append((node.id, tuple(checked)))
    return ImplementationLibrary(tuple(entries))
