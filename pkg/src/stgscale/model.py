"""Core data model: streaming task graphs, implementation libraries, solutions.

All types are immutable after construction and safe to share between threads.
Document declaration order is preserved everywhere (node lists, channel lists,
library entries) and is the canonical tie-breaking order downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional

from stgscale.errors import StructuralError

#: Reserved prefix for generated structural node ids (fork/join trees,
#: replicas). User documents may not declare ids with this prefix.
GENERATED_PREFIX = "__fj_"

#: Prefix marking a node-input-port reference inside an op graph ("$0", "$1").
PORT_REF = "$"


class OpKind(Enum):
    """Primitive operation kinds with their default cycle latencies.

    FORK and JOIN are structural-only kinds: they are introduced by
    replication synthesis and never appear in user input.
    """

    ADD = ("ADD", 2, 1)
    SUB = ("SUB", 2, 1)
    MUL = ("MUL", 2, 2)
    DIV = ("DIV", 2, 8)
    SQRT = ("SQRT", 1, 4)
    CONST = ("CONST", 0, 1)
    PASS = ("PASS", 1, 1)
    FORK = ("FORK", 1, 1)
    JOIN = ("JOIN", 1, 1)
    TABLE = ("TABLE", None, 1)

    def __init__(self, label: str, arity: Optional[int], default_latency: int):
        self.label = label
        self.arity = arity  # None = declared by the op's argument list
        self.default_latency = default_latency

    @property
    def structural(self) -> bool:
        return self in (OpKind.FORK, OpKind.JOIN)


#: Default latency profile, overridable per document ("profile" key).
DEFAULT_LATENCIES = {kind.name: kind.default_latency for kind in OpKind}


def resolve_profile(overrides: Optional[dict] = None) -> dict:
    """Merge user latency overrides onto the default profile."""
    profile = dict(DEFAULT_LATENCIES)
    if overrides:
        for name, latency in overrides.items():
            if name not in profile:
                raise StructuralError(f"unknown op kind in profile: {name!r}")
            profile[name] = int(latency)
    return profile


@dataclass(frozen=True)
class OpNode:
    """One primitive operation inside a composite node's op graph.

    ``inputs`` entries are either op ids or node-input-port references
    written ``$<port>`` (optionally ``$<port>:<index>`` to pick a token
    within the port's per-firing batch).
    """

    id: str
    kind: OpKind
    latency: int
    inputs: tuple = ()
    value: int = 0          # CONST payload
    table: tuple = ()       # TABLE payload

    def is_port_ref(self, arg: str) -> bool:
        return arg.startswith(PORT_REF)


def parse_port_ref(arg: str) -> tuple:
    """Split a "$port[:index]" reference into (port, index)."""
    body = arg[len(PORT_REF):]
    if ":" in body:
        port_s, idx_s = body.split(":", 1)
        return int(port_s), int(idx_s)
    return int(body), 0


@dataclass(frozen=True)
class OpGraph:
    """DAG of primitive operations inside one composite node.

    ``outputs[k]`` lists the op ids that drive output port ``k``, one id per
    token produced on that port per firing.
    """

    ops: tuple
    outputs: tuple  # tuple of tuples of op ids, one inner tuple per out port

    def op_map(self) -> dict:
        return {op.id: op for op in self.ops}

    def topo_order(self) -> tuple:
        """Canonical topological order: Kahn's algorithm, ready set iterated
        in declaration order. Raises StructuralError on a cycle."""
        by_id = self.op_map()
        deps = {}
        for op in self.ops:
            deps[op.id] = [a for a in op.inputs
                           if not a.startswith(PORT_REF) and a in by_id]
        remaining = {oid: set(d) for oid, d in deps.items()}
        order = []
        placed = set()
        while len(order) < len(self.ops):
            progressed = False
            for op in self.ops:
                if op.id in placed:
                    continue
                if remaining[op.id] <= placed:
                    order.append(op.id)
                    placed.add(op.id)
                    progressed = True
            if not progressed:
                cyclic = sorted(set(remaining) - placed)
                raise StructuralError(f"op graph cycle at {{{', '.join(cyclic)}}}")
        return tuple(order)

    def total_latency(self) -> int:
        return sum(op.latency for op in self.ops)

    def max_latency(self) -> int:
        return max(op.latency for op in self.ops)

    def check(self, num_in: int, in_rates: tuple, out_rates: tuple) -> list:
        """Structural issues as human-readable strings; empty list = valid."""
        issues = []
        by_id = {}
        for op in self.ops:
            if op.id in by_id:
                issues.append(f"duplicate op id {op.id!r}")
            by_id[op.id] = op
        for op in self.ops:
            if op.kind.structural:
                issues.append(f"op {op.id!r}: kind {op.kind.name} is structural-only")
            if op.latency < 1:
                issues.append(f"op {op.id!r}: latency must be >= 1")
            arity = op.kind.arity
            if arity is not None and len(op.inputs) != arity:
                issues.append(
                    f"op {op.id!r}: {op.kind.name} takes {arity} operand(s), "
                    f"got {len(op.inputs)}")
            if op.kind is OpKind.TABLE:
                if not op.inputs:
                    issues.append(f"op {op.id!r}: TABLE needs at least one operand")
                if not op.table:
                    issues.append(f"op {op.id!r}: TABLE needs a non-empty table")
            for arg in op.inputs:
                if arg.startswith(PORT_REF):
                    try:
                        port, idx = parse_port_ref(arg)
                    except ValueError:
                        issues.append(f"op {op.id!r}: malformed port reference {arg!r}")
                        continue
                    if not (0 <= port < num_in):
                        issues.append(f"op {op.id!r}: input port {port} out of range")
                    elif not (0 <= idx < in_rates[port]):
                        issues.append(
                            f"op {op.id!r}: token index {idx} exceeds rate of port {port}")
                elif arg not in by_id:
                    issues.append(f"op {op.id!r}: unknown operand {arg!r}")
        if len(self.outputs) != len(out_rates):
            issues.append(
                f"op graph declares {len(self.outputs)} output port(s), "
                f"node has {len(out_rates)}")
        for k, regs in enumerate(self.outputs):
            if k < len(out_rates) and len(regs) != out_rates[k]:
                issues.append(
                    f"output port {k} must be driven by {out_rates[k]} op(s), "
                    f"got {len(regs)}")
            for oid in regs:
                if oid not in by_id:
                    issues.append(f"output port {k}: unknown op {oid!r}")
        if not issues:
            try:
                self.topo_order()
            except StructuralError as exc:
                issues.append(str(exc))
        return issues


@dataclass(frozen=True)
class CompositeNode:
    """A streaming task graph node.

    ``in_rates[j]`` / ``out_rates[k]`` are the tokens consumed/produced per
    firing on each port. ``op_graph`` is optional; nodes without one must be
    backed by implementation library entries.
    """

    id: str
    in_rates: tuple = ()
    out_rates: tuple = ()
    stateless: bool = True
    op_graph: Optional[OpGraph] = None

    @property
    def num_in(self) -> int:
        return len(self.in_rates)

    @property
    def num_out(self) -> int:
        return len(self.out_rates)


@dataclass(frozen=True)
class Channel:
    """A blocking FIFO channel between an output port and an input port."""

    producer: tuple  # (node id, output port index)
    consumer: tuple  # (node id, input port index)

    @property
    def key(self) -> str:
        return (f"{self.producer[0]}.{self.producer[1]}"
                f"->{self.consumer[0]}.{self.consumer[1]}")


@dataclass(frozen=True)
class Application:
    """A feed-forward streaming task graph."""

    nodes: tuple
    channels: tuple

    def __post_init__(self):
        object.__setattr__(self, "_index", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> CompositeNode:
        try:
            return self._index[node_id]
        except KeyError:
            raise StructuralError(f"unknown node {node_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._index

    @property
    def sources(self) -> tuple:
        fed = {c.consumer[0] for c in self.channels}
        return tuple(n.id for n in self.nodes if n.id not in fed)

    @property
    def sinks(self) -> tuple:
        producing = {c.producer[0] for c in self.channels}
        return tuple(n.id for n in self.nodes if n.id not in producing)

    def in_channels(self, node_id: str) -> list:
        return [c for c in self.channels if c.consumer[0] == node_id]

    def out_channels(self, node_id: str) -> list:
        return [c for c in self.channels if c.producer[0] == node_id]

    def topo_order(self) -> tuple:
        """Node ids in topological order, document order among ready nodes."""
        placed = set()
        order = []
        while len(order) < len(self.nodes):
            progressed = False
            for n in self.nodes:
                if n.id in placed:
                    continue
                if all(c.producer[0] in placed for c in self.in_channels(n.id)):
                    order.append(n.id)
                    placed.add(n.id)
                    progressed = True
            if not progressed:
                cyclic = sorted(n.id for n in self.nodes if n.id not in placed)
                raise StructuralError(f"cycle at {{{', '.join(cyclic)}}}")
        return tuple(order)


def rate_factors(app: Application) -> dict:
    """Firings of each node per application input token, as exact rationals.

    The first declared source is the primary source with factor 1; any other
    connected component is seeded at its first node in document order.
    Raises StructuralError if the channel relations are inconsistent
    (reconvergent paths with different cumulative rate factors).
    """
    r: dict = {}
    sources = app.sources
    if sources:
        r[sources[0]] = Fraction(1)
    # propagate over channels until fixed point; detect inconsistencies
    pending = list(app.channels)
    while True:
        progressed = False
        for ch in app.channels:
            p, k = ch.producer
            c, j = ch.consumer
            out_rate = app.node(p).out_rates[k]
            in_rate = app.node(c).in_rates[j]
            if p in r and c in r:
                if r[p] * out_rate != r[c] * in_rate:
                    raise StructuralError(
                        f"rate inconsistency at {c!r} (channel {ch.key})")
            elif p in r:
                r[c] = r[p] * out_rate / in_rate
                progressed = True
            elif c in r:
                r[p] = r[c] * in_rate / out_rate
                progressed = True
        if not progressed:
            unseeded = [n.id for n in app.nodes if n.id not in r]
            if not unseeded:
                return r
            r[unseeded[0]] = Fraction(1)


@dataclass(frozen=True)
class Implementation:
    """One realizable variant of a composite node.

    ``area`` is in primitive-node units (one simple PE = 1). ``ii`` is the
    initiation interval in cycles. ``detail`` carries the construction recipe
    (cluster boundaries / expansion target) for elaboration and is not part
    of equality.
    """

    owner: str
    version_tag: str
    area: int
    ii: int
    provenance: str  # pipelined | expanded | clustered | library
    latency: Optional[int] = field(default=None, compare=False)
    detail: Optional[tuple] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.area < 1 or self.ii < 1:
            raise StructuralError(
                f"implementation {self.owner}/{self.version_tag}: "
                f"area and ii must be >= 1")

    @property
    def pipeline_latency(self) -> int:
        return self.latency if self.latency is not None else self.ii


@dataclass(frozen=True)
class ImplementationLibrary:
    """Per-node lists of implementations, sorted by ascending ii."""

    entries: tuple  # tuple of (node id, tuple of Implementation)

    def node_ids(self) -> tuple:
        return tuple(nid for nid, _ in self.entries)

    def get(self, node_id: str) -> tuple:
        for nid, impls in self.entries:
            if nid == node_id:
                return impls
        raise StructuralError(f"no library entries for node {node_id!r}")

    def has(self, node_id: str) -> bool:
        return any(nid == node_id for nid, _ in self.entries)

    def find(self, node_id: str, version_tag: str) -> Implementation:
        for impl in self.get(node_id):
            if impl.version_tag == version_tag:
                return impl
        raise StructuralError(
            f"no implementation {version_tag!r} for node {node_id!r}")


def pareto_clean(points: Iterable[Implementation]) -> list:
    """Drop dominated implementations; result sorted by ascending ii with
    strictly decreasing area. Earlier candidates win ties."""
    ordered = sorted(points, key=lambda p: (p.ii, p.area))
    kept: list = []
    for p in ordered:
        if kept and kept[-1].ii == p.ii:
            continue  # same ii, worse-or-equal area
        if kept and kept[-1].area <= p.area:
            continue  # slower and not smaller
        kept.append(p)
    return kept


def is_pareto_clean(impls: Iterable[Implementation]) -> bool:
    impls = list(impls)
    for a in impls:
        for b in impls:
            if a is b:
                continue
            if b.area <= a.area and b.ii <= a.ii and (
                    b.area < a.area or b.ii < a.ii):
                return False
    return True


@dataclass(frozen=True)
class Selection:
    """Chosen implementation and replica count for one node."""

    impl: Implementation
    replicas: int

    def __post_init__(self):
        if self.replicas < 1:
            raise StructuralError("replica count must be >= 1")


@dataclass(frozen=True)
class Fusion:
    """Producer/consumer combining record: each producer replica feeds up to
    ``group`` consumer replicas directly, eliminating the fork tree between
    them."""

    producer: str
    consumer: str
    group: int


@dataclass(frozen=True)
class Assignment:
    """A full solution: per-node selection, fusion records, overhead area of
    the synthesized fork/join trees, and the achieved application inverse
    throughput."""

    selections: tuple  # tuple of (node id, Selection), document order
    fusions: tuple = ()
    overhead_area: int = 0
    achieved_v: Fraction = Fraction(0)

    def selection_map(self) -> dict:
        return dict(self.selections)

    def selection(self, node_id: str) -> Selection:
        for nid, sel in self.selections:
            if nid == node_id:
                return sel
        raise StructuralError(f"no selection for node {node_id!r}")

    def node_area(self) -> int:
        return sum(sel.impl.area * sel.replicas for _, sel in self.selections)

    def total_area(self) -> int:
        return self.node_area() + self.overhead_area


def total_area(assignment: Assignment,
               library: Optional[ImplementationLibrary] = None) -> int:
    """Node area plus fork/join overhead area.

    When a library is supplied, every selection must reference an entry in
    it; a dangling reference raises StructuralError.
    """
    if library is not None:
        for nid, sel in assignment.selections:
            found = library.find(nid, sel.impl.version_tag)
            if (found.area, found.ii) != (sel.impl.area, sel.impl.ii):
                raise StructuralError(
                    f"selection for {nid!r} does not match library entry "
                    f"{sel.impl.version_tag!r}")
    return assignment.total_area()


@dataclass(frozen=True)
class OptimizationTarget:
    """Optimization mode plus shared knobs.

    ``mode`` is "min-area" (v_tgt set) or "max-throughput" (area_budget set).
    ``nf`` is the fan-in/fan-out limit of a primitive node; ``margin`` is the
    transient area-overshoot fraction the heuristic budgeter accepts.
    """

    mode: str
    v_tgt: Optional[Fraction] = None
    area_budget: Optional[int] = None
    nf: int = 4
    margin: Fraction = Fraction(1, 10)

    def __post_init__(self):
        if self.mode not in ("min-area", "max-throughput"):
            raise StructuralError(f"unknown optimization mode {self.mode!r}")
        if self.mode == "min-area" and (self.v_tgt is None or self.v_tgt <= 0):
            raise StructuralError("min-area mode needs a positive v_tgt")
        if self.mode == "max-throughput" and (
                self.area_budget is None or self.area_budget < 1):
            raise StructuralError("max-throughput mode needs a positive area budget")
        if self.nf < 2:
            raise StructuralError("fan limit nf must be >= 2")


@dataclass(frozen=True)
class Violation:
    """One violated invariant found by validate_application."""

    code: str      # cycle | rate-inconsistency | port | arity | ...
    subject: str   # node or channel identifier
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, subject: str, message: str):
        self.violations.append(Violation(code, subject, message))


def validate_application(app: Application) -> ValidationReport:
    """Check every structural invariant; violations are data, not failures."""
    report = ValidationReport()
    seen = set()
    for node in app.nodes:
        if node.id in seen:
            report.add("duplicate-id", node.id, f"duplicate node id {node.id!r}")
        seen.add(node.id)
        if node.id.startswith(GENERATED_PREFIX):
            report.add("reserved-id", node.id,
                       f"node id {node.id!r} uses the reserved prefix "
                       f"{GENERATED_PREFIX!r}")
        for j, rate in enumerate(node.in_rates):
            if rate < 1:
                report.add("rate", node.id,
                           f"node {node.id!r}: input rate on port {j} must be >= 1")
        for k, rate in enumerate(node.out_rates):
            if rate < 1:
                report.add("rate", node.id,
                           f"node {node.id!r}: output rate on port {k} must be >= 1")

    sinks = set(app.sinks)
    for node in app.nodes:
        if node.num_out == 0 and node.id not in sinks:
            report.add("port", node.id,
                       f"non-sink node {node.id!r} declares no output ports")
        if node.op_graph is not None:
            for issue in node.op_graph.check(node.num_in, node.in_rates,
                                             node.out_rates):
                report.add("op-graph", node.id, f"node {node.id!r}: {issue}")
        elif node.num_in == 0 and node.stateless:
            report.add("stateless-source", node.id,
                       f"node {node.id!r}: a source without an op graph is a "
                       f"generator and must be declared stateful")

    # channel endpoint checks
    for ch in app.channels:
        for (nid, port), side, limit_of in (
                (ch.producer, "producer", lambda n: n.num_out),
                (ch.consumer, "consumer", lambda n: n.num_in)):
            if not app.has_node(nid):
                report.add("unknown-reference", ch.key,
                           f"channel {ch.key}: unknown {side} node {nid!r}")
            elif not (0 <= port < limit_of(app.node(nid))):
                report.add("port", ch.key,
                           f"channel {ch.key}: {side} port {port} out of range")

    if any(v.code == "unknown-reference" or v.code == "port"
           for v in report.violations):
        return report  # downstream checks need sane endpoints

    # every input port driven exactly once
    for node in app.nodes:
        for j in range(node.num_in):
            drivers = [c for c in app.channels if c.consumer == (node.id, j)]
            if len(drivers) == 0:
                report.add("port", node.id,
                           f"input port {j} of node {node.id!r} has no channel")
            elif len(drivers) > 1:
                report.add("port", node.id,
                           f"input port {j} of node {node.id!r} has "
                           f"{len(drivers)} drivers")
        if node.id not in sinks:
            for k in range(node.num_out):
                if not any(c.producer == (node.id, k) for c in app.channels):
                    report.add("port", node.id,
                               f"output port {k} of node {node.id!r} has no "
                               f"channel and the node is not a sink")

    try:
        app.topo_order()
    except StructuralError as exc:
        report.add("cycle", "application", str(exc))
        return report

    try:
        rate_factors(app)
    except StructuralError as exc:
        report.add("rate-inconsistency", "application", str(exc))

    return report
