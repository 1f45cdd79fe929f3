"""Simulation driver: machine flattening, reports, equivalence checking."""

from __future__ import annotations

import random
import struct
from array import array
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from stgscale.errors import InternalError, StructuralError
from stgscale.model import Application, Assignment, CompositeNode, Implementation
from stgscale.rates import format_v
from stgscale.sim import backend
from stgscale.sim import ops as O
from stgscale.sim.plan import MachinePlan, build_app_plan, build_impl_plan


@dataclass
class MachineArrays:
    """Flat, buffer-friendly machine encoding shared by both kernels."""

    n_inst: int
    n_wires: int
    guard: int
    ii: array
    lat: array
    fkind: array
    prog: array
    cap: array
    salt: array
    in_mode: array
    in_start: array
    in_wire: array
    in_rate: array
    out_start: array
    out_mode: array
    out_rate: array
    och_start: array
    och_wire: array
    w_cap: array
    w_ring_start: array
    w_wink: array
    w_rec: array
    rec_start: array
    p_start: array
    p_nregs: array
    code: array
    pp_start: array
    pr_start: array
    pregs: array
    tables: array
    order: array


def flatten(plan: MachinePlan, order_seed: Optional[int] = None) -> MachineArrays:
    q = lambda xs: array("q", xs)
    insts = plan.instances
    n_inst = len(insts)
    n_wires = len(plan.wires)

    in_start, in_wire, in_rate = [0], [], []
    out_start, out_mode, out_rate = [0], [], []
    och_start, och_wire = [0], []
    for inst in insts:
        for port in inst.in_ports:
            if port is None:
                raise InternalError(f"instance {inst.id!r} has an unwired port")
            in_wire.append(port[0])
            in_rate.append(port[1])
        in_start.append(len(in_wire))
        for mode, rate, wires in inst.out_ports:
            out_mode.append(mode)
            out_rate.append(rate)
            och_wire.extend(wires)
            och_start.append(len(och_wire))
        out_start.append(len(out_mode))

    w_cap, w_ring_start, w_wink, w_rec, rec_start = [], [0], [], [], [0]
    for w in plan.wires:
        capacity = max(1, w.capacity)
        w_cap.append(capacity)
        w_ring_start.append(w_ring_start[-1] + capacity)
        if w.expected:
            w_wink.append(max(0, (w.expected * 2) // 10))
        else:
            w_wink.append(0)
        rec = 1 if w.record_key else 0
        w_rec.append(rec)
        rec_start.append(rec_start[-1] + (w.expected + 16 if rec else 0))

    p_start, p_nregs, code = [0], [], []
    pp_start, pr_start, pregs = [0], [0], []
    for pr in plan.programs:
        code.extend(pr.code)
        p_start.append(len(code) // 5 * 5)
        p_nregs.append(pr.nregs)
        for regs in pr.out_regs:
            pregs.extend(regs)
            pr_start.append(len(pregs))
        pp_start.append(pp_start[-1] + len(pr.out_regs))

    order = list(range(n_inst))
    if order_seed is not None:
        random.Random(order_seed).shuffle(order)

    return MachineArrays(
        n_inst=n_inst, n_wires=n_wires, guard=plan.guard,
        ii=q(i.ii for i in insts), lat=q(i.lat for i in insts),
        fkind=q(i.fkind for i in insts), prog=q(i.prog for i in insts),
        cap=q(i.cap for i in insts), salt=q(i.salt for i in insts),
        in_mode=q(i.in_mode for i in insts),
        in_start=q(in_start), in_wire=q(in_wire), in_rate=q(in_rate),
        out_start=q(out_start), out_mode=q(out_mode), out_rate=q(out_rate),
        och_start=q(och_start), och_wire=q(och_wire),
        w_cap=q(w_cap), w_ring_start=q(w_ring_start), w_wink=q(w_wink),
        w_rec=q(w_rec), rec_start=q(rec_start),
        p_start=q(p_start), p_nregs=q(p_nregs), code=q(code),
        pp_start=q(pp_start), pr_start=q(pr_start), pregs=q(pregs),
        tables=q(plan.tables if plan.tables else [0]), order=q(order))


@dataclass
class ChannelMeasurement:
    produced: int
    consumed: int
    measured_v: Optional[Fraction]   # cycles per logical token, steady window


@dataclass
class SimReport:
    cycles: int
    deadlock: bool
    channels: dict = field(default_factory=dict)   # key -> ChannelMeasurement
    sink_streams: dict = field(default_factory=dict)  # key -> list[int]
    fired_total: int = 0

    def app_v(self) -> Optional[Fraction]:
        """Measured application inverse throughput: the slowest sink stream."""
        best = None
        for key, stream in self.sink_streams.items():
            meas = self.channels.get(key)
            if meas and meas.measured_v is not None:
                if best is None or meas.measured_v > best:
                    best = meas.measured_v
        return best


def _assemble(plan: MachinePlan, result) -> SimReport:
    if result["deadlock"] == 2:
        raise InternalError("simulation exceeded its cycle guard")
    report = SimReport(cycles=result["t_end"],
                       deadlock=bool(result["deadlock"]),
                       fired_total=sum(result["fired"]))
    for w in plan.wires:
        if not w.measure_key and not w.record_key:
            continue
        n = result["w_count"][w.idx]
        k = max(0, (w.expected * 2) // 10) if w.expected else 0
        v = None
        if n - 1 > k and result["w_cyck"][w.idx] >= 0:
            span = result["w_cyclast"][w.idx] - result["w_cyck"][w.idx]
            v = Fraction(span, n - 1 - k) * Fraction(1, w.ratio)
        key = w.measure_key or w.record_key
        report.channels[key] = ChannelMeasurement(
            produced=n * w.ratio,
            consumed=result["w_consumed"][w.idx] * w.ratio,
            measured_v=v)
        if w.record_key:
            base = 0
            for idx in range(w.idx):
                if plan.wires[idx].record_key:
                    base += plan.wires[idx].expected + 16
            report.sink_streams[w.record_key] = list(
                result["rec_vals"][base:base + n])
    return report


def simulate(app: Application, assignment: Optional[Assignment] = None,
             n_tokens: int = 10000, fifo_capacity: int = 2, nf: int = 4,
             order_seed: Optional[int] = None) -> SimReport:
    """Run the application for ``n_tokens`` input tokens and drain.

    With ``assignment=None`` every node runs as a single unit-interval
    instance (the functional identity reference). Output streams depend only
    on the input streams and the functional graph, never on capacities or
    instance iteration order.
    """
    plan = build_app_plan(app, assignment, n_tokens, fifo_capacity, nf)
    machine = flatten(plan, order_seed)
    return _assemble(plan, backend.run(machine))


def simulate_implementation(node: CompositeNode, impl: Implementation,
                            n_firings: int = 10000,
                            fifo_capacity: Optional[int] = None,
                            nf: int = 4) -> SimReport:
    """Elaborate one implementation into primitive PEs and measure it."""
    plan = build_impl_plan(node, impl, n_firings, fifo_capacity, nf)
    machine = flatten(plan)
    return _assemble(plan, backend.run(machine))


@dataclass(frozen=True)
class EquivalenceResult:
    equal: bool
    sink: str = ""
    index: int = -1  # first divergence


def check_equivalence(ref: SimReport, test: SimReport) -> EquivalenceResult:
    """Token-by-token comparison of sink streams."""
    if sorted(ref.sink_streams) != sorted(test.sink_streams):
        return EquivalenceResult(False, sink="<sink sets differ>", index=0)
    for key in sorted(ref.sink_streams):
        a = ref.sink_streams[key]
        b = test.sink_streams[key]
        for i, (x, y) in enumerate(zip(a, b)):
            if x != y:
                return EquivalenceResult(False, key, i)
        if len(a) != len(b):
            return EquivalenceResult(False, key, min(len(a), len(b)))
    return EquivalenceResult(True)


def sim_report_csv(report: SimReport) -> str:
    lines = ["kind,id,produced,consumed,measured_v"]
    for key in sorted(report.channels):
        meas = report.channels[key]
        v = format_v(meas.measured_v) if meas.measured_v is not None else ""
        lines.append(f"channel,{key},{meas.produced},{meas.consumed},{v}")
    lines.append(f"run,cycles,{report.cycles},,")
    lines.append(f"run,deadlock,{1 if report.deadlock else 0},,")
    return "\n".join(lines) + "\n"


def dump_sink_streams(report: SimReport, base_path: str) -> list:
    """Write each sink stream as little-endian 64-bit values; returns paths."""
    paths = []
    for key in sorted(report.sink_streams):
        safe = key.replace("/", "_").replace(".", "_")
        path = f"{base_path}.{safe}.bin"
        with open(path, "wb") as fh:
            for tok in report.sink_streams[key]:
                fh.write(struct.pack("<q", tok))
        paths.append(path)
    return paths
