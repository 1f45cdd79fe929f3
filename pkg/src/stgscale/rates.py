"""Per-channel inverse throughput propagation, slack, weights, bottlenecks.

All rates are exact rationals so propagation is associative and reproducible;
reports format values with fixed 6-decimal rendering.

Conventions (inverse throughput v = cycles per token, lower is faster):

* a node's own capability on input port j is ii / (In_j * replicas);
* the effective rate of a channel is the slower of what the producer can
  deliver and what the consumer can absorb;
* output rates follow from the slowest input: v_out_k = min_j(v_in_j * In_j)
  divided by Out_k;
* the application inverse throughput is measured at the primary source, in
  cycles per application input token.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from stgscale.errors import StructuralError
from stgscale.model import (
    Application,
    Assignment,
    CompositeNode,
    Implementation,
    rate_factors,
)


def format_v(value: Fraction) -> str:
    """Fixed 6-decimal rendering via integer arithmetic (no float rounding)."""
    scaled = Fraction(value) * 10 ** 6
    whole = scaled.numerator // scaled.denominator
    rem = scaled - whole
    if rem * 2 >= 1:
        whole += 1
    sign = "-" if whole < 0 else ""
    whole = abs(whole)
    return f"{sign}{whole // 10 ** 6}.{whole % 10 ** 6:06d}"


def node_port_rates(impl: Implementation, node: CompositeNode):
    """Per-port inverse throughput capability of one implementation
    (single instance): v_in_j = ii / In_j, v_out_k = ii / Out_k."""
    if impl.owner and impl.owner != node.id:
        raise StructuralError(
            f"implementation {impl.version_tag!r} belongs to {impl.owner!r}, "
            f"not {node.id!r}")
    v_in = tuple(Fraction(impl.ii, r) for r in node.in_rates)
    v_out = tuple(Fraction(impl.ii, r) for r in node.out_rates)
    return v_in, v_out


@dataclass
class ChannelRates:
    provided_v: Fraction            # slower of producer delivery / consumer intake
    required_v: Optional[Fraction] = None   # back-propagated from the target
    expected_v: Optional[Fraction] = None   # steady-state rate the bottleneck allows

    @property
    def slack(self) -> Optional[Fraction]:
        if self.required_v is None:
            return None
        return self.provided_v - self.required_v


@dataclass
class NodeRates:
    r: Fraction                      # firings per application input token
    v_firing: Fraction               # effective firing interval ii / replicas
    weight: Optional[Fraction] = None


@dataclass
class RateReport:
    channels: dict = field(default_factory=dict)  # channel key -> ChannelRates
    nodes: dict = field(default_factory=dict)     # node id -> NodeRates
    achieved_v: Fraction = Fraction(0)
    v_tgt: Optional[Fraction] = None
    node_order: tuple = ()


def propagate_rates(app: Application, assignment: Assignment) -> RateReport:
    """Forward pass in topological order.

    For every channel the effective inverse throughput is the max of the
    producer's propagated output rate and the consumer's own intake
    capability; node outputs follow from the slowest effective input. The
    achieved application rate is the largest per-node (firing interval x
    firings per application token).
    """
    sel = assignment.selection_map()
    r = rate_factors(app)
    report = RateReport(node_order=tuple(n.id for n in app.nodes))
    v_out_prop: dict = {}

    order = app.topo_order()
    for nid in order:
        node = app.node(nid)
        choice = sel.get(nid)
        if choice is None:
            raise StructuralError(f"assignment misses node {nid!r}")
        eff_ii = Fraction(choice.impl.ii, choice.replicas)
        report.nodes[nid] = NodeRates(r=r[nid], v_firing=eff_ii)

        in_terms = []
        for ch in app.in_channels(nid):
            j = ch.consumer[1]
            own = eff_ii / node.in_rates[j]
            arriving = v_out_prop[ch.key]
            effective = max(own, arriving)
            report.channels[ch.key] = ChannelRates(provided_v=effective)
            in_terms.append(effective * node.in_rates[j])

        # output rate relation: the firing interval implied by the inputs is
        # the tightest per-port term; the node's own interval still floors it
        firing_interval = max(eff_ii, min(in_terms)) if in_terms else eff_ii
        for k in range(node.num_out):
            v_out = firing_interval / node.out_rates[k]
            for ch in app.out_channels(nid):
                if ch.producer[1] == k:
                    v_out_prop[ch.key] = v_out

    achieved = Fraction(0)
    for nid in order:
        achieved = max(achieved, report.nodes[nid].v_firing * report.nodes[nid].r)
    report.achieved_v = achieved

    # steady state: every stream runs at the bottleneck-limited application
    # rate; a channel carrying t tokens per application token sees v_A / t
    for ch in app.channels:
        p, k = ch.producer
        tokens_per_app = r[p] * app.node(p).out_rates[k]
        report.channels[ch.key].expected_v = achieved / tokens_per_app
    return report


def slack_and_weights(report: RateReport, app: Application,
                      v_tgt: Fraction) -> RateReport:
    """Back-propagate the target rate and score each node's criticality.

    required_v of a channel is the interval the target demands of it; a
    node's weight is how many times too slow its slowest effective input is
    (>= 1 means the node cannot keep up). Sources are scored against their
    firing budget directly.
    """
    v_tgt = Fraction(v_tgt)
    report.v_tgt = v_tgt
    r = rate_factors(app)
    for ch in app.channels:
        p, k = ch.producer
        tokens_per_app = r[p] * app.node(p).out_rates[k]
        report.channels[ch.key].required_v = v_tgt / tokens_per_app

    for nid, nr in report.nodes.items():
        budget = v_tgt / nr.r  # allowed firing interval
        weight = nr.v_firing / budget
        for ch in app.in_channels(nid):
            cr = report.channels[ch.key]
            weight = max(weight, cr.provided_v / cr.required_v)
        nr.weight = weight
    return report


def find_bottleneck(report: RateReport) -> str:
    """Node with the maximum weight; document order breaks ties."""
    if not report.nodes:
        raise StructuralError("empty rate report")
    best = None
    best_w = None
    for nid in report.node_order:
        w = report.nodes[nid].weight
        if w is None:
            raise StructuralError("weights not computed; run slack_and_weights")
        if best_w is None or w > best_w:
            best, best_w = nid, w
    return best


def rate_report_csv(report: RateReport) -> str:
    """One CSV with channel rows then node rows.

    Channel rows: kind,id,required_v,provided_v,slack,expected_v
    Node rows:    kind,id,weight,r,,
    """
    lines = ["kind,id,required_v,provided_v,slack,expected_v"]
    for key in sorted(report.channels):
        cr = report.channels[key]
        req = format_v(cr.required_v) if cr.required_v is not None else ""
        slack = format_v(cr.slack) if cr.slack is not None else ""
        exp = format_v(cr.expected_v) if cr.expected_v is not None else ""
        lines.append(f"channel,{key},{req},{format_v(cr.provided_v)},{slack},{exp}")
    for nid in report.node_order:
        nr = report.nodes[nid]
        w = format_v(nr.weight) if nr.weight is not None else ""
        lines.append(f"node,{nid},{w},{format_v(nr.r)},,")
    lines.append(f"application,achieved_v,{format_v(report.achieved_v)},,,")
    return "\n".join(lines) + "\n"
