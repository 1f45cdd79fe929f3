"""Implementation variants of a single composite node.

Three construction routes from the node's op graph:

* pipeline: one op per PE, initiation interval gated by the slowest op;
* expand: replicate slow ops round-robin until a target interval is met;
* cluster: pack ops onto fewer PEs, trading throughput for area.

Clusters are contiguous slices of the canonical topological order (document
order among ready ops), which makes the optimal packing computable exactly
with the classic linear-partition dynamic program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from stgscale.errors import ParameterError, StructuralError
from stgscale.model import Implementation, OpGraph, pareto_clean
from stgscale.replicate import tree_overhead


@dataclass(frozen=True)
class ClusterPartition:
    """Contiguous partition of a fixed topological order into clusters.

    ``bounds[i]`` is the end index (exclusive) of cluster i over ``order``;
    ``weights`` holds the per-op latencies in the same order.
    """

    order: tuple   # op ids, canonical topological order
    weights: tuple  # per-op latency, aligned with order
    bounds: tuple  # strictly increasing, last == len(order)

    def __post_init__(self):
        if not self.bounds or self.bounds[-1] != len(self.order):
            raise ParameterError("partition must cover every op")
        lo = 0
        for hi in self.bounds:
            if hi <= lo:
                raise ParameterError("clusters must be non-empty")
            lo = hi

    @property
    def k(self) -> int:
        return len(self.bounds)

    @property
    def loads(self) -> tuple:
        out = []
        lo = 0
        for hi in self.bounds:
            out.append(sum(self.weights[lo:hi]))
            lo = hi
        return tuple(out)

    @property
    def ii(self) -> int:
        return max(self.loads)

    def clusters(self) -> list:
        out = []
        lo = 0
        for hi in self.bounds:
            out.append(self.order[lo:hi])
            lo = hi
        return out

    def with_bounds(self, bounds) -> "ClusterPartition":
        return ClusterPartition(self.order, self.weights, tuple(bounds))


def make_partition(g: OpGraph, bounds) -> ClusterPartition:
    order = g.topo_order()
    by_id = g.op_map()
    weights = tuple(by_id[o].latency for o in order)
    return ClusterPartition(order, weights, tuple(bounds))


def _optimal_bounds(weights, k):
    """Contiguous partition of ``weights`` into k blocks minimizing the
    maximum block sum. O(n^2 k) dynamic program; returns (bounds, best)."""
    n = len(weights)
    prefix = [0]
    for w in weights:
        prefix.append(prefix[-1] + w)

    def seg(i, j):  # sum of weights[i:j]
        return prefix[j] - prefix[i]

    INF = float("inf")
    best = [[INF] * (n + 1) for _ in range(k + 1)]
    cut = [[0] * (n + 1) for _ in range(k + 1)]
    best[0][0] = 0
    for parts in range(1, k + 1):
        for j in range(parts, n + 1):
            for i in range(parts - 1, j):
                cand = max(best[parts - 1][i], seg(i, j))
                if cand < best[parts][j]:
                    best[parts][j] = cand
                    cut[parts][j] = i
    bounds = []
    j = n
    for parts in range(k, 0, -1):
        bounds.append(j)
        j = cut[parts][j]
    return tuple(reversed(bounds)), best[k][n]


def _require_ops(g: OpGraph):
    if not g.ops:
        raise StructuralError("op graph has no operations")


def pipeline_impl(g: OpGraph, owner: str = "") -> Implementation:
    """One op per PE; the slowest op stalls the rest."""
    _require_ops(g)
    latency = _critical_path(g)
    return Implementation(owner, "pipe", len(g.ops), g.max_latency(),
                          "pipelined", latency=latency,
                          detail=("pipeline",))


def _critical_path(g: OpGraph) -> int:
    depth = {}
    by_id = g.op_map()
    for oid in g.topo_order():
        op = by_id[oid]
        upstream = [depth[a] for a in op.inputs if a in by_id]
        depth[oid] = op.latency + (max(upstream) if upstream else 0)
    return max(depth.values())


def expand_impl(g: OpGraph, target_ii: int, nf: int = 4,
                owner: str = "") -> Implementation:
    """Replicate ops slower than ``target_ii`` round-robin until the whole
    pipeline initiates every ``target_ii`` cycles.

    Area counts the op copies plus split/merge interconnect for any op whose
    copy count exceeds the fan limit (one split structure per operand, one
    merge for the result).
    """
    _require_ops(g)
    if target_ii < 1:
        raise ParameterError("target initiation interval must be >= 1")
    peak = g.max_latency()
    if target_ii > peak:
        raise ParameterError(
            f"target ii {target_ii} exceeds the pipelined interval {peak}")
    area = 0
    copies = {}
    for op in g.ops:
        c = math.ceil(op.latency / target_ii)
        copies[op.id] = c
        area += c
        if c > nf:
            per_side = tree_overhead(c, nf)
            area += per_side * (len(op.inputs) + 1)
    return Implementation(owner, f"exp{target_ii}", area, target_ii,
                          "expanded", latency=_critical_path(g),
                          detail=("expand", target_ii, tuple(sorted(copies.items()))))


def cluster_impl(g: OpGraph, k: int, owner: str = "") -> Implementation:
    """Pack the ops onto exactly k PEs, each executing its slice serially.

    The initiation interval is the minimum achievable maximum cluster load
    over contiguous partitions of the canonical order (exact DP optimum).
    """
    _require_ops(g)
    if not (1 <= k <= len(g.ops)):
        raise ParameterError(f"cluster count {k} out of range 1..{len(g.ops)}")
    order = g.topo_order()
    by_id = g.op_map()
    weights = [by_id[o].latency for o in order]
    bounds, best = _optimal_bounds(weights, k)
    return Implementation(owner, f"c{k}", k, int(best), "clustered",
                          latency=g.total_latency(),
                          detail=("cluster", bounds))


def enumerate_implementations(g: OpGraph, nf: int = 4,
                              owner: str = "") -> list:
    """All Pareto-optimal variants, sorted by ascending initiation interval.

    Candidates: the pipelined mapping, every expansion target down to one
    cycle, and every cluster count. Dominated points are dropped; within the
    returned list a larger interval always means strictly smaller area.
    """
    _require_ops(g)
    candidates = [pipeline_impl(g, owner)]
    peak = g.max_latency()
    for t in range(peak, 0, -1):
        candidates.append(expand_impl(g, t, nf, owner))
    for k in range(len(g.ops), 0, -1):
        candidates.append(cluster_impl(g, k, owner))
    cleaned = pareto_clean(candidates)
    out = []
    for i, impl in enumerate(cleaned):
        out.append(Implementation(owner, f"v{i + 1}", impl.area, impl.ii,
                                  impl.provenance, latency=impl.latency,
                                  detail=impl.detail))
    return out


def library_csv(impls) -> str:
    """Stable CSV rendering of an implementation list."""
    lines = ["version_tag,ii,area,provenance"]
    for impl in impls:
        lines.append(f"{impl.version_tag},{impl.ii},{impl.area},{impl.provenance}")
    return "\n".join(lines) + "\n"
