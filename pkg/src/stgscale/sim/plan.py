"""Lowering of applications (plus assignments) to flat simulator machines.

The expanded machine realizes replication structurally: round-robin split
and merge elements wire replicas into the graph. Elements that fit the fan
limit are free (a node may feed or collect up to ``nf`` streams itself);
larger counts synthesize charged FORK/JOIN tree nodes of one area unit each.
The same builders elaborate a single implementation (pipeline, expansion or
clustering of an op graph) into a machine of primitive PEs for standalone
measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from stgscale.errors import InternalError, LegalityError, StructuralError
from stgscale.model import (
    Application,
    Assignment,
    CompositeNode,
    GENERATED_PREFIX,
    Implementation,
    OpGraph,
    OpKind,
    OpNode,
    Selection,
    parse_port_ref,
    rate_factors,
)
from stgscale.replicate import TreeShape, build_tree_shape
from stgscale.sim import ops as O


@dataclass
class Program:
    code: list          # 5 ints per instruction
    nregs: int
    out_regs: list      # per output port: list of register indices
    tables: list        # shared table pool


@dataclass
class Wire:
    idx: int
    key: str
    capacity: int
    record_key: str = ""    # non-empty: capture every written token
    measure_key: str = ""   # non-empty: logical channel this wire represents
    ratio: int = 1          # logical tokens per wire token
    expected: int = 0       # expected wire tokens for the whole run


@dataclass
class Inst:
    id: str
    fkind: int
    ii: int
    lat: int
    cap: int = -1           # max firings, -1 unlimited
    salt: int = 0
    in_mode: int = O.IN_ALL
    in_ports: list = field(default_factory=list)   # (wire idx, rate)
    out_ports: list = field(default_factory=list)  # [mode, rate, [wire idx]]
    prog: int = -1
    kind: str = "node"      # node | replica | fork | join
    of: str = ""
    area: int = 0           # charged overhead area (structural elements)


@dataclass
class MachinePlan:
    instances: list
    wires: list
    programs: list
    capacity: int
    n_tokens: int
    overhead_area: int = 0
    sink_keys: list = field(default_factory=list)
    logical_keys: list = field(default_factory=list)
    guard: int = 0
    tables: list = field(default_factory=list)


def compile_program(g: OpGraph, tables: list) -> Program:
    """Lower an op graph to a register program; registers in topo order."""
    order = g.topo_order()
    by_id = g.op_map()
    reg = {}
    code = []

    def emit(opcode, a=0, b=0, c=0, d=0):
        code.extend([opcode, a, b, c, d])
        return len(code) // 5 - 1

    for oid in order:
        op = by_id[oid]
        srcs = []
        for arg in op.inputs:
            if arg.startswith("$"):
                port, idx = parse_port_ref(arg)
                srcs.append(emit(O.OP_LOADIN, port, idx))
            else:
                srcs.append(reg[arg])
        if op.kind is OpKind.ADD:
            r = emit(O.OP_ADD, srcs[0], srcs[1])
        elif op.kind is OpKind.SUB:
            r = emit(O.OP_SUB, srcs[0], srcs[1])
        elif op.kind is OpKind.MUL:
            r = emit(O.OP_MUL, srcs[0], srcs[1])
        elif op.kind is OpKind.DIV:
            r = emit(O.OP_DIV, srcs[0], srcs[1])
        elif op.kind is OpKind.SQRT:
            r = emit(O.OP_SQRT, srcs[0])
        elif op.kind is OpKind.PASS:
            r = emit(O.OP_PASS, srcs[0])
        elif op.kind is OpKind.CONST:
            r = emit(O.OP_CONST, op.value)
        elif op.kind is OpKind.TABLE:
            idx_reg = srcs[0]
            for extra in srcs[1:]:
                idx_reg = emit(O.OP_ADD, idx_reg, extra)
            off = len(tables)
            tables.extend(op.table)
            r = emit(O.OP_TABLE, idx_reg, off, len(op.table))
        else:  # pragma: no cover - structural kinds rejected upstream
            raise InternalError(f"cannot compile op kind {op.kind}")
        reg[oid] = r
    out_regs = [[reg[oid] for oid in port_regs] for port_regs in g.outputs]
    return Program(code, len(code) // 5, out_regs, tables)


class _Builder:
    def __init__(self, capacity: int, nf: int):
        self.capacity = capacity
        self.nf = nf
        self.instances: list = []
        self.wires: list = []
        self.programs: list = []
        self.tables: list = []
        self._prog_cache: dict = {}
        self._seq = 0

    def fresh(self, stem: str) -> str:
        self._seq += 1
        return f"{GENERATED_PREFIX}{stem}_{self._seq}"

    def add_inst(self, inst: Inst) -> int:
        self.instances.append(inst)
        return len(self.instances) - 1

    def add_wire(self, key: str, capacity: Optional[int] = None) -> int:
        w = Wire(len(self.wires), key, self.capacity if capacity is None
                 else capacity)
        self.wires.append(w)
        return w.idx

    def program_for(self, node_id: str, g: OpGraph) -> int:
        if node_id not in self._prog_cache:
            self.programs.append(compile_program(g, self.tables))
            self._prog_cache[node_id] = len(self.programs) - 1
        return self._prog_cache[node_id]

    def connect(self, src: tuple, dst: tuple, key: str,
                capacity: Optional[int] = None) -> int:
        """Wire producer (inst, port, rate) to consumer (inst, port, rate)."""
        w = self.add_wire(key, capacity)
        si, sp, s_rate = src
        inst = self.instances[si]
        while len(inst.out_ports) <= sp:
            inst.out_ports.append([O.OUT_BC, 1, []])
        inst.out_ports[sp][1] = s_rate
        inst.out_ports[sp][2].append(w)
        di, dp, d_rate = dst
        dinst = self.instances[di]
        while len(dinst.in_ports) <= dp:
            dinst.in_ports.append(None)
        dinst.in_ports[dp] = (w, d_rate)
        return w

    # -- split / merge structures -------------------------------------

    def make_fork(self, stem: str, charged: bool) -> int:
        return self.add_inst(Inst(self.fresh(stem + "_f"), O.FUNC_PASS, 1, 1,
                                  kind="fork", area=1 if charged else 0))

    def make_join(self, stem: str, charged: bool) -> int:
        return self.add_inst(Inst(self.fresh(stem + "_j"), O.FUNC_PASS, 1, 1,
                                  in_mode=O.IN_RR, kind="join",
                                  area=1 if charged else 0))

    def split(self, src: tuple, consumers: list, stem: str,
              forced_root: bool = False) -> int:
        """Round-robin distribution from one producer port to many consumer
        ports. Returns the wire feeding the structure's entry point. Within
        the fan limit the distribution is free: a virtual (zero-area) fork
        element stands in for the producer's own fan-out capability.
        ``forced_root`` charges the entry element even within the fan limit
        (a dissolved producer's stream always needs its own splitter).
        ``src`` is (inst, port, rate); consumers are (inst, port, rate)."""
        n = len(consumers)
        if n == 1 and not forced_root:
            return self.connect(src, consumers[0], f"{stem}")
        if n <= self.nf:
            root = self.make_fork(stem, charged=forced_root)
            entry = self.connect(src, (root, 0, 1), f"{stem}_in")
            self.instances[root].out_ports = [[O.OUT_RR, 1, []]]
            for i, dst in enumerate(consumers):
                self.connect((root, 0, 1), dst, f"{stem}#{i}")
            return entry
        root = self.make_fork(stem, charged=True)
        entry = self.connect(src, (root, 0, 1), f"{stem}_in")
        shape = build_tree_shape(n, self.nf)
        self._split_shape(root, shape, consumers, stem)
        return entry

    def _split_shape(self, fork_idx: int, shape: TreeShape, consumers: list,
                     stem: str):
        self.instances[fork_idx].out_ports = [[O.OUT_RR, 1, []]]
        for child in shape.children:
            if isinstance(child, TreeShape):
                sub = self.make_fork(stem, charged=True)
                self.connect((fork_idx, 0, 1), (sub, 0, 1),
                             f"{stem}@{child.lo}:{child.hi}")
                self._split_shape(sub, child, consumers, stem)
            else:
                self.connect((fork_idx, 0, 1), consumers[child],
                             f"{stem}#{child}")

    def merge(self, producers: list, stem: str) -> tuple:
        """Round-robin merge of many producer ports into a single stream.

        Returns (inst, port, rate) of the merged stream source. Producers
        are (inst, port, rate) with rate 1 streams."""
        n = len(producers)
        if n == 1:
            return producers[0]
        if n <= self.nf:
            hub = self.make_join(stem, charged=False)
            for i, src in enumerate(producers):
                self.connect(src, (hub, i, 1), f"{stem}#{i}")
            return (hub, 0, 1)
        shape = build_tree_shape(n, self.nf)
        root = self._merge_shape(shape, producers, stem)
        return (root, 0, 1)

    def _merge_shape(self, shape: TreeShape, producers: list, stem: str) -> int:
        join_idx = self.make_join(stem, charged=True)
        port = 0
        for child in shape.children:
            if isinstance(child, TreeShape):
                sub = self._merge_shape(child, producers, stem)
                self.connect((sub, 0, 1), (join_idx, port, 1),
                             f"{stem}@{child.lo}:{child.hi}")
            else:
                self.connect(producers[child], (join_idx, port, 1),
                             f"{stem}#{child}")
            port += 1
        return join_idx


def _leaf_shares(n_leaves: int, total: int, nf: int) -> list:
    """Token share of each leaf under nested modular round-robin."""
    def dist(count, n, arms):
        # arms: list of ('leaf', index) or ('sub', arms)
        shares = {}
        c = len(arms)
        for i, arm in enumerate(arms):
            n_i = (n - i + c - 1) // c if n >= 0 else 0
            if arm[0] == "leaf":
                shares[arm[1]] = n_i
            else:
                shares.update(dist(None, n_i, arm[1]))
        return shares

    shape = build_tree_shape(n_leaves, nf)
    if shape is None:
        arms = [("leaf", i) for i in range(n_leaves)]
    else:
        def to_arms(s: TreeShape):
            out = []
            for child in s.children:
                if isinstance(child, TreeShape):
                    out.append(("sub", to_arms(child)))
                else:
                    out.append(("leaf", child))
            return out
        arms = to_arms(shape)
    shares = dist(None, total, arms)
    return [shares[i] for i in range(n_leaves)]


def _identity_selection(node: CompositeNode) -> Selection:
    impl = Implementation(node.id, "identity", 1, 1, "library", latency=1)
    return Selection(impl, 1)


def build_app_plan(app: Application, assignment: Optional[Assignment],
                   n_tokens: int, capacity: int, nf: int = 4) -> MachinePlan:
    """Expand an application (optionally transformed by an assignment) into
    a runnable machine."""
    if n_tokens < 1:
        raise StructuralError("token count must be >= 1")
    r = rate_factors(app)
    sel = (assignment.selection_map() if assignment is not None
           else {n.id: _identity_selection(n) for n in app.nodes})
    for node in app.nodes:
        if node.id not in sel:
            raise StructuralError(f"assignment misses node {node.id!r}")
        if sel[node.id].replicas > 1 and not node.stateless:
            raise LegalityError(
                f"node {node.id!r} is stateful and cannot be replicated")
    fused_by_consumer = {}
    fusion_producers = set()
    if assignment is not None:
        for f in assignment.fusions:
            fused_by_consumer[f.consumer] = f
            fusion_producers.add(f.producer)

    b = _Builder(capacity, nf)
    replicas: dict = {}

    for doc_index, node in enumerate(app.nodes):
        choice = sel[node.id]
        nr = choice.replicas
        if node.op_graph is not None:
            fkind, prog = O.FUNC_PROG, b.program_for(node.id, node.op_graph)
        elif node.num_in == 0:
            fkind, prog = O.FUNC_GEN, -1
        else:
            fkind, prog = O.FUNC_MIX, -1
        idxs = []
        for i in range(nr):
            name = node.id if nr == 1 else f"{GENERATED_PREFIX}{node.id}_r{i}"
            inst = Inst(name, fkind, choice.impl.ii,
                        choice.impl.pipeline_latency, salt=doc_index,
                        prog=prog, kind="node" if nr == 1 else "replica",
                        of=node.id)
            inst.in_ports = [None] * node.num_in
            inst.out_ports = [[O.OUT_BC, rate, []] for rate in node.out_rates]
            idxs.append(b.add_inst(inst))
        replicas[node.id] = idxs

    # source firing caps (per replica share of the merged output order)
    for node in app.nodes:
        if node.num_in > 0:
            continue
        total = math.ceil(n_tokens * r[node.id])
        idxs = replicas[node.id]
        if len(idxs) == 1:
            b.instances[idxs[0]].cap = total
        else:
            for i, share in enumerate(_leaf_shares(len(idxs), total, nf)):
                b.instances[idxs[i]].cap = share

    sink_keys: list = []
    logical_keys: list = []
    sinks = set(app.sinks)

    # chain bookkeeping for fused merges: consumer -> fusion
    def chain_of(tail_id: str) -> list:
        chain = [tail_id]
        while chain[0] in fused_by_consumer:
            chain.insert(0, fused_by_consumer[chain[0]].producer)
        return chain

    def merged_stream(node_id: str, port: int) -> tuple:
        """Single-stream source for node output port, synthesizing the merge
        structure (nested for fusion chains)."""
        node = app.node(node_id)
        idxs = replicas[node_id]
        rate = node.out_rates[port]
        if len(idxs) == 1:
            return (idxs[0], port, rate)
        if rate != 1:
            raise StructuralError(
                f"replicated node {node_id!r} must have unit output rates")
        chain = chain_of(node_id)
        streams = [(i, port, 1) for i in idxs]
        # collapse fused groups bottom-up with one charged join per group
        for level in range(len(chain) - 1, 0, -1):
            parent = chain[level - 1]
            group = fused_by_consumer[chain[level]].group
            n_parent = len(replicas[parent])
            merged = []
            for p in range(n_parent):
                members = streams[p * group:(p + 1) * group]
                if len(members) == 1:
                    merged.append(members[0])
                    continue
                j = b.make_join(f"{node_id}_out{port}", charged=True)
                for q, src in enumerate(members):
                    b.connect(src, (j, q, 1), f"{node_id}.out{port}.g{p}#{q}")
                merged.append((j, 0, 1))
            streams = merged
        return b.merge(streams, f"{node_id}_out{port}")

    for node in app.nodes:
        nid = node.id
        for k in range(node.num_out):
            consumers = [c for c in app.channels if c.producer == (nid, k)]
            fused_out = [c for c in consumers
                         if fused_by_consumer.get(c.consumer[0], None) is not None
                         and fused_by_consumer[c.consumer[0]].producer == nid]
            if fused_out:
                if len(consumers) != 1:
                    raise StructuralError(
                        f"fused producer {nid!r} must have a single consumer")
                ch = consumers[0]
                dn, dj = ch.consumer
                dnode = app.node(dn)
                group = fused_by_consumer[dn].group
                p_idxs = replicas[nid]
                d_idxs = replicas[dn]
                if len(d_idxs) > group * len(p_idxs):
                    raise StructuralError(
                        f"fusion {nid!r}->{dn!r}: group capacity exceeded")
                for g, pi in enumerate(p_idxs):
                    members = d_idxs[g * group:(g + 1) * group]
                    if not members:
                        raise StructuralError(
                            f"fusion {nid!r}->{dn!r}: idle producer replica")
                    mode = O.OUT_RR if len(members) > 1 else O.OUT_BC
                    b.instances[pi].out_ports[k][0] = mode
                    for q, di in enumerate(members):
                        w = b.connect((pi, k, node.out_rates[k]),
                                      (di, dj, dnode.in_rates[dj]),
                                      f"{ch.key}.g{g}#{q}")
                        if g == 0 and q == 0:
                            wire = b.wires[w]
                            wire.measure_key = ch.key
                            wire.ratio = len(d_idxs)
                            logical_keys.append(ch.key)
                continue

            stream = merged_stream(nid, k) if (consumers or nid in sinks) else None
            if stream is None:
                continue
            if not consumers:  # application output: attach a collector
                key = f"{nid}.{k}"
                expected = math.ceil(n_tokens * r[nid] * node.out_rates[k])
                w = b.add_wire(f"collector:{key}", capacity=expected + 4)
                si, sp, s_rate = stream
                inst = b.instances[si]
                while len(inst.out_ports) <= sp:
                    inst.out_ports.append([O.OUT_BC, 1, []])
                inst.out_ports[sp][1] = s_rate
                inst.out_ports[sp][2].append(w)
                wire = b.wires[w]
                wire.record_key = key
                wire.measure_key = key
                wire.expected = expected
                sink_keys.append(key)
                continue
            for ch in consumers:
                dn, dj = ch.consumer
                dnode = app.node(dn)
                d_idxs = replicas[dn]
                record_key = ""
                if dnode.num_out == 0 and dn in sinks:
                    record_key = f"{dn}.in{dj}"
                if len(d_idxs) == 1:
                    w = b.connect(stream, (d_idxs[0], dj, dnode.in_rates[dj]),
                                  ch.key)
                    wire = b.wires[w]
                else:
                    if dnode.in_rates[dj] != 1:
                        raise StructuralError(
                            f"replicated node {dn!r} must have unit input rates")
                    forced = dn in fusion_producers
                    entry = b.split(stream,
                                    [(di, dj, 1) for di in d_idxs],
                                    f"{dn}_in{dj}", forced_root=forced)
                    wire = b.wires[entry]
                wire.measure_key = ch.key
                logical_keys.append(ch.key)
                if record_key:
                    wire.record_key = record_key
                    sink_keys.append(record_key)

    # expected token counts for measurement windows
    for wire in b.wires:
        if wire.measure_key and not wire.expected:
            key = wire.measure_key
            for ch in app.channels:
                if ch.key == key:
                    p, k = ch.producer
                    logical = n_tokens * r[p] * app.node(p).out_rates[k]
                    wire.expected = max(1, math.ceil(logical / wire.ratio))
                    break

    overhead = sum(inst.area for inst in b.instances)
    max_ii = max((inst.ii for inst in b.instances), default=1)
    guard = 1000 + 48 * n_tokens * max_ii
    return MachinePlan(b.instances, b.wires, b.programs, capacity, n_tokens,
                       overhead, sink_keys, logical_keys, guard, b.tables)


def _op_subgraph(g: OpGraph, member_ids: tuple) -> tuple:
    """Split an op graph slice into (program graph, external inputs).

    External inputs (port refs and ops outside the slice) become fresh port
    references in order of first use; returns the rewritten OpGraph covering
    only the slice plus the ordered list of external source names."""
    members = set(member_ids)
    by_id = g.op_map()
    external: list = []

    def ext_port(name: str) -> str:
        if name not in external:
            external.append(name)
        return f"${external.index(name)}"

    new_ops = []
    for oid in member_ids:
        op = by_id[oid]
        new_inputs = tuple(
            arg if (not arg.startswith("$") and arg in members)
            else ext_port(arg)
            for arg in op.inputs)
        new_ops.append(OpNode(op.id, op.kind, op.latency, new_inputs,
                              op.value, op.table))
    return new_ops, external


def build_impl_plan(node: CompositeNode, impl: Implementation,
                    n_firings: int, capacity: Optional[int] = None,
                    nf: int = 4) -> MachinePlan:
    """Elaborate one implementation of an op-graph node into a machine of
    primitive PEs for standalone measurement.

    Every external port of the node must have unit rates; a generator
    instance feeds the ports and collectors capture the output streams. The
    measured inverse throughput at the collectors is the implementation's
    effective initiation interval. Reconvergent paths inside the graph can
    carry a latency skew up to the summed op latencies, so FIFOs default to
    that depth (plus element slack) to expose the full steady-state rate.
    """
    g = node.op_graph
    if g is None:
        raise StructuralError(f"node {node.id!r} has no op graph to elaborate")
    if capacity is None:
        capacity = g.total_latency() + 4 * len(g.ops) + 16
    if any(rate != 1 for rate in node.in_rates + node.out_rates):
        raise StructuralError("implementation elaboration needs unit rates")
    detail = impl.detail or ("pipeline",)
    b = _Builder(capacity, nf)
    by_id = g.op_map()
    order = g.topo_order()

    gen_idx = None
    if node.num_in:
        gen_idx = b.add_inst(Inst(f"{GENERATED_PREFIX}feed", O.FUNC_GEN, 1, 1,
                                  cap=n_firings, kind="node", of="feed"))
        b.instances[gen_idx].out_ports = [[O.OUT_BC, 1, []]
                                          for _ in range(node.num_in)]

    # producers[name] = list of (inst, port, rate) streams carrying the value
    producers: dict = {}

    def feed_of(name: str) -> list:
        if name.startswith("$"):
            port, _ = parse_port_ref(name)
            return [(gen_idx, port, 1)]
        return producers[name]

    if detail[0] == "cluster":
        bounds = detail[1]
        lo = 0
        for ci, hi in enumerate(bounds):
            member_ids = order[lo:hi]
            lo = hi
            new_ops, external = _op_subgraph(g, member_ids)
            member_set = set(member_ids)
            exported = [oid for oid in member_ids
                        if any(oid in by_id[other].inputs
                               for other in order if other not in member_set)
                        or any(oid in port_regs for port_regs in g.outputs)]
            sub = OpGraph(tuple(new_ops), tuple((oid,) for oid in exported))
            load = sum(by_id[o].latency for o in member_ids)
            prog = b.add_inst(Inst(f"{GENERATED_PREFIX}pe{ci}", O.FUNC_PROG,
                                   load, load, prog=len(b.programs),
                                   kind="node", of=node.id))
            b.programs.append(compile_program(sub, b.tables))
            b.instances[prog].in_ports = [None] * len(external)
            b.instances[prog].out_ports = [[O.OUT_BC, 1, []] for _ in exported]
            for pi, name in enumerate(external):
                src = feed_of(name)[0]
                b.connect(src, (prog, pi, 1), f"pe{ci}.in{pi}")
            for k, oid in enumerate(exported):
                producers[oid] = [(prog, k, 1)]
    else:
        copies = {oid: 1 for oid in order}
        if detail[0] == "expand":
            copies.update(dict(detail[2]))
        for oid in order:
            op = by_id[oid]
            c = copies[oid]
            insts = []
            for i in range(c):
                name = f"{GENERATED_PREFIX}{oid}_c{i}" if c > 1 else oid
                single, external = _op_subgraph(g, (oid,))
                sub = OpGraph(tuple(single), ((oid,),))
                idx = b.add_inst(Inst(name, O.FUNC_PROG, op.latency,
                                      op.latency, prog=len(b.programs),
                                      kind="node", of=node.id))
                b.programs.append(compile_program(sub, b.tables))
                b.instances[idx].in_ports = [None] * len(external)
                b.instances[idx].out_ports = [[O.OUT_BC, 1, []]]
                if op.kind is OpKind.CONST:
                    b.instances[idx].cap = (n_firings + c - 1 - i) // c
                insts.append((idx, external))
            c_insts = [idx for idx, _ in insts]
            external = insts[0][1]
            for pi, name in enumerate(external):
                streams = feed_of(name)
                src = b.merge(streams, f"{oid}_in{pi}") if len(streams) > 1 \
                    else streams[0]
                if len(c_insts) == 1:
                    b.connect(src, (c_insts[0], pi, 1), f"{oid}.in{pi}")
                else:
                    b.split(src, [(idx, pi, 1) for idx in c_insts],
                            f"{oid}_in{pi}")
            producers[oid] = [(idx, 0, 1) for idx in c_insts]

    sink_keys = []
    for k, port_regs in enumerate(g.outputs):
        oid = port_regs[0]
        streams = producers[oid]
        src = b.merge(streams, f"out{k}") if len(streams) > 1 else streams[0]
        key = f"{node.id}.{k}"
        w = b.add_wire(f"collector:{key}", capacity=n_firings + 4)
        si, sp, s_rate = src
        inst = b.instances[si]
        inst.out_ports[sp][1] = s_rate
        inst.out_ports[sp][2].append(w)
        wire = b.wires[w]
        wire.record_key = key
        wire.measure_key = key
        wire.expected = n_firings
        sink_keys.append(key)

    overhead = sum(inst.area for inst in b.instances)
    max_ii = max(inst.ii for inst in b.instances)
    guard = 1000 + 48 * n_firings * max_ii
    return MachinePlan(b.instances, b.wires, b.programs, capacity, n_firings,
                       overhead, sink_keys, [], guard, b.tables)


def plan_structure(plan: MachinePlan):
    """Generated structural elements and the full expanded wiring, for
    assignment serialization. Collector wires are omitted (an absent channel
    marks the application output)."""
    from stgscale.frontend import StructureChannel, StructureNode

    nodes = []
    for inst in plan.instances:
        if inst.kind == "replica":
            nodes.append(StructureNode(inst.id, "REPLICA", inst.of, 0))
        elif inst.kind == "fork":
            nodes.append(StructureNode(inst.id, "FORK", inst.of, inst.area))
        elif inst.kind == "join":
            nodes.append(StructureNode(inst.id, "JOIN", inst.of, inst.area))
    channels = []
    wire_src = {}
    wire_dst = {}
    wire_mode = {}
    for i, inst in enumerate(plan.instances):
        for p, (mode, _rate, wires) in enumerate(inst.out_ports):
            for w in wires:
                wire_src[w] = (inst.id, p)
                wire_mode[w] = "rr" if mode == O.OUT_RR else "bc"
        for p, port in enumerate(inst.in_ports):
            if port is not None:
                wire_dst[port[0]] = (inst.id, p)
    for w in sorted(wire_src):
        if w not in wire_dst:
            continue  # collector
        channels.append(StructureChannel(wire_src[w], wire_dst[w],
                                         wire_mode[w]))
    return nodes, channels
