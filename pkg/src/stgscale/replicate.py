"""Replica counts, fork/join tree synthesis, overhead accounting, combining.

Replication runs ``nr`` copies of a stateless node behind round-robin
split/merge interconnect. Up to ``nf`` destinations can be wired straight off
a node's port for free; beyond that, layered FORK/JOIN nodes are synthesized.
A full tree over nf^H leaves costs sum(nf^i for i in range(H)) nodes; smaller
leaf counts prune unneeded subtrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from stgscale.errors import LegalityError, ParameterError
from stgscale.model import CompositeNode, Implementation


def replica_count(v_node, v_target) -> int:
    """Replicas needed to bring inverse throughput v_node down to v_target."""
    if v_node <= 0 or v_target <= 0:
        raise ParameterError("inverse throughputs must be positive")
    return max(1, math.ceil(Fraction(v_node) / Fraction(v_target)))


def tree_depth(nr: int, nf: int) -> int:
    """Smallest H with nf**H >= nr; 0 when a single instance needs no tree."""
    if nr < 1:
        raise ParameterError("replica count must be >= 1")
    if nf < 2:
        raise ParameterError("fan limit must be >= 2")
    h = 0
    reach = 1
    while reach < nr:
        reach *= nf
        h += 1
    return h


@dataclass
class TreeShape:
    """Recursive distribution shape over a contiguous leaf range.

    ``children`` entries are either TreeShape (a synthesized tree node) or an
    int (a directly wired leaf index). The root of a shape is itself one
    synthesized node.
    """

    lo: int
    hi: int
    children: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.hi - self.lo

    def count_nodes(self) -> int:
        return 1 + sum(c.count_nodes() for c in self.children
                       if isinstance(c, TreeShape))

    def depth(self) -> int:
        sub = [c.depth() for c in self.children if isinstance(c, TreeShape)]
        return 1 + (max(sub) if sub else 0)


def _split(lo: int, hi: int, nf: int) -> TreeShape:
    shape = TreeShape(lo, hi)
    size = hi - lo
    if size <= nf:
        shape.children = list(range(lo, hi))
        return shape
    q, r = divmod(size, nf)
    at = lo
    for i in range(nf):
        part = q + (1 if i < r else 0)
        if part == 1:
            shape.children.append(at)
        else:
            shape.children.append(_split(at, at + part, nf))
        at += part
    return shape


def build_tree_shape(nr: int, nf: int) -> Optional[TreeShape]:
    """Distribution shape for nr leaves, or None when direct wiring suffices
    (nr <= nf never costs tree nodes)."""
    if nr < 1:
        raise ParameterError("replica count must be >= 1")
    if nf < 2:
        raise ParameterError("fan limit must be >= 2")
    if nr <= nf:
        return None
    return _split(0, nr, nf)


def tree_overhead(nr: int, nf: int) -> int:
    """Synthesized node count for one split (or merge) structure over nr
    replicas. Zero when nr <= nf; a full tree over nf^H leaves matches
    sum(nf^i, i < H) exactly."""
    shape = build_tree_shape(nr, nf)
    return 0 if shape is None else shape.count_nodes()


def layer_rates(v_stream: Fraction, nf: int, depth: int) -> list:
    """Per-layer (input, output) inverse throughputs for a full tree fed by a
    stream of inverse throughput ``v_stream``. Layer 1 is the root."""
    rates = []
    for h in range(1, depth + 1):
        v_in = Fraction(v_stream) * nf ** (h - 1)
        rates.append((v_in, v_in * nf))
    return rates


@dataclass(frozen=True)
class ForkJoinTree:
    """One synthesized split or merge structure."""

    direction: str         # fork | join
    replicas: int
    fan: int
    shape: Optional[TreeShape]

    @property
    def node_count(self) -> int:
        return 0 if self.shape is None else self.shape.count_nodes()

    @property
    def depth(self) -> int:
        return tree_depth(self.replicas, self.fan)


@dataclass(frozen=True)
class ForkJoinPlan:
    """Trees a replicated node needs: one fork per input channel, one join
    per output port."""

    node_id: str
    replicas: int
    fan: int
    forks: tuple
    joins: tuple

    @property
    def fork_nodes(self) -> int:
        return sum(t.node_count for t in self.forks)

    @property
    def join_nodes(self) -> int:
        return sum(t.node_count for t in self.joins)

    @property
    def overhead_area(self) -> int:
        return self.fork_nodes + self.join_nodes


def build_fork_join(node: CompositeNode, impl: Implementation, nr: int,
                    nf: int, in_channels: Optional[int] = None) -> ForkJoinPlan:
    """Plan the interconnect for running ``nr`` replicas of ``node``.

    ``in_channels`` defaults to the node's input port count (one channel per
    port in a valid application).
    """
    if nr > 1 and not node.stateless:
        raise LegalityError(
            f"node {node.id!r} is stateful and cannot be replicated")
    n_in = node.num_in if in_channels is None else in_channels
    if nr == 1:
        return ForkJoinPlan(node.id, 1, nf, (), ())
    shape = build_tree_shape(nr, nf)
    forks = tuple(ForkJoinTree("fork", nr, nf, shape) for _ in range(n_in))
    joins = tuple(ForkJoinTree("join", nr, nf, shape) for _ in range(node.num_out))
    return ForkJoinPlan(node.id, nr, nf, forks, joins)


def replication_overhead(node: CompositeNode, nr: int, nf: int) -> int:
    """Tree overhead of replicating ``node`` nr times without combining."""
    if nr <= 1:
        return 0
    per_side = tree_overhead(nr, nf)
    return per_side * (node.num_in + node.num_out)


@dataclass(frozen=True)
class CombinedNode:
    """Plan for fusing a producer implementation with ``group`` consumer
    replicas, eliminating the final fork layer between them.

    The producer is re-instantiated ``producer_replicas`` times at the slower
    implementation ``producer_impl``; each instance drives ``group`` consumer
    replicas directly. The stream into the producer replicas still needs a
    (shallower) distribution structure of ``new_overhead`` nodes.
    """

    producer: str
    consumer: str
    group: int
    producer_impl: Implementation
    producer_replicas: int
    consumer_replicas: int
    v_combined: Fraction
    new_overhead: int
    saved_nodes: int

    @property
    def producer_area(self) -> int:
        return self.producer_impl.area * self.producer_replicas


def combined_feed_overhead(nr_combined: int, nf: int) -> int:
    """Distribution nodes feeding the combined replicas.

    The original producer instance dissolves into the combined nodes, so its
    single input stream always needs a root splitter, even when the combined
    replica count fits the fan limit.
    """
    if nr_combined <= 1:
        return 0
    if nr_combined <= nf:
        return 1
    return tree_overhead(nr_combined, nf)


def fusion_chains(fusions) -> dict:
    """Map each fusion-chain tail to the ordered chain [head, ..., tail]."""
    by_consumer = {f.consumer: f for f in fusions}
    producers = {f.producer for f in fusions}
    chains = {}
    for f in fusions:
        if f.consumer in producers:
            continue  # intermediate link
        chain = [f.consumer]
        while chain[0] in by_consumer:
            chain.insert(0, by_consumer[chain[0]].producer)
        chains[f.consumer] = chain
    return chains


def assignment_overhead(app, selections: dict, fusions, nf: int) -> int:
    """Total fork/join area of an assignment, mirroring the machine builder.

    Per replicated node: one split structure per input channel and one merge
    structure per output port. Fusion removes the structures between the
    fused pair: the chain head's feed keeps a root splitter even within the
    fan limit (its original single instance dissolved), interior streams are
    direct, and the tail's merge nests one join per producer-group plus a
    structure over the head count.
    """
    by_consumer = {f.consumer: f for f in fusions}
    producers = {f.producer for f in fusions}
    chains = fusion_chains(fusions)
    total = 0
    for node in app.nodes:
        nr = selections[node.id].replicas
        if nr <= 1:
            continue
        in_channels = len(app.in_channels(node.id))
        if node.id in by_consumer:
            pass  # fed directly by its fused producer
        elif node.id in producers:
            total += combined_feed_overhead(nr, nf) * in_channels
        else:
            total += tree_overhead(nr, nf) * in_channels
        if node.id in producers:
            continue  # outputs absorbed by the fusion
        if node.id in chains:
            chain = chains[node.id]
            counts = [selections[n].replicas for n in chain]
            merge_nodes = 0
            for level in range(len(chain) - 1, 0, -1):
                group = by_consumer[chain[level]].group
                n_child = counts[level]
                for p in range(counts[level - 1]):
                    members = min((p + 1) * group, n_child) - p * group
                    if members >= 2:
                        merge_nodes += 1
            merge_nodes += tree_overhead(counts[0], nf)
            total += merge_nodes * node.num_out
        else:
            total += tree_overhead(nr, nf) * node.num_out
    return total


def combine_with_fork(producer_library, producer_current: Implementation,
                      producer_nr: int, consumer_v, nr: int, nf: int,
                      v_stream, producer_node: CompositeNode,
                      out_port: int = 0) -> Optional[CombinedNode]:
    """Try to fuse the producer with groups of ``nf`` consumer replicas.

    Applicable only when the consumer needs more than ``nf`` replicas (so a
    fork tree exists to collapse), the producer is a single stateless
    instance, and the producer's library holds an implementation fast enough
    to feed one group. Returns None when not applicable.
    """
    if nr <= nf:
        return None
    if producer_nr != 1 or not producer_node.stateless:
        return None
    nr_new = math.ceil(Fraction(nr) / nf)
    out_rate = producer_node.out_rates[out_port]
    # each fused producer handles the share of the stream its group consumes
    v_limit = Fraction(v_stream) * nr_new
    candidate = None
    for impl in producer_library:
        v_out = Fraction(impl.ii, out_rate)
        if v_out <= v_limit:
            if candidate is None or v_out > Fraction(candidate.ii, out_rate):
                candidate = impl
    if candidate is None:
        return None
    depth = tree_depth(nr, nf)
    old_overhead = tree_overhead(nr, nf)
    new_overhead = combined_feed_overhead(nr_new, nf)
    return CombinedNode(
        producer=producer_node.id,
        consumer="",
        group=nf,
        producer_impl=candidate,
        producer_replicas=nr_new,
        consumer_replicas=nr,
        v_combined=Fraction(consumer_v) / nf,
        new_overhead=new_overhead,
        saved_nodes=nf ** (depth - 1),
    )
