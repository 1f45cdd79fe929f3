"""Heuristic trade-off finder: throughput budgeting with overshoot margin,
bottleneck-first walk, and producer/consumer combining.

The walk starts from the most critical bottleneck, moves toward the sinks,
then backward toward the sources, then covers the rest breadth-first. At
every replication site it tries to fuse the producer with consumer-replica
groups; a fusion is accepted only on strict total-area improvement, so the
result never exceeds the no-combining baseline (which per-node greedy
selection makes identical to the exact optimizer's solution on separable
instances).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from stgscale.errors import InfeasibleError
from stgscale.exact import _node_choices
from stgscale.model import (
    Application,
    Assignment,
    Fusion,
    ImplementationLibrary,
    OptimizationTarget,
    Selection,
    rate_factors,
)
from stgscale.rates import find_bottleneck, propagate_rates, slack_and_weights
from stgscale.replicate import assignment_overhead, combine_with_fork

MAX_RELAXATIONS = 64


@dataclass
class Budget:
    """Per-node firing-interval budgets consistent with rate propagation."""

    v_app: Fraction                       # application-level target
    per_node: dict                        # node id -> allowed firing interval
    margin: Fraction
    estimated_area: int
    relaxations: int = 0


def _greedy_choice(app, lib, nid, r, v_app, nf):
    choices = _node_choices(app, lib, nid, r, v_app, nf)
    if not choices:
        return None
    return min(choices, key=lambda c: (c.cost, c.lib_index))


def estimate_area(app: Application, lib: ImplementationLibrary, v_app,
                  nf: int) -> Optional[int]:
    """Cheapest per-node selection meeting the budget, tree overhead
    included; None when some node cannot meet it."""
    r = rate_factors(app)
    total = 0
    for node in app.nodes:
        choice = _greedy_choice(app, lib, node.id, r[node.id], v_app, nf)
        if choice is None:
            return None
        total += choice.cost
    return total


def _fastest_assignment(app, lib) -> Assignment:
    selections = []
    for node in app.nodes:
        impl = min(lib.get(node.id), key=lambda im: (im.ii, im.area))
        selections.append((node.id, Selection(impl, 1)))
    return Assignment(tuple(selections))


def budget_throughput(app: Application, lib: ImplementationLibrary,
                      target: OptimizationTarget,
                      nf: Optional[int] = None) -> Budget:
    """Pick the application-level budget.

    Min-area mode budgets the target directly. Max-throughput mode starts
    from the fastest single-instance selection and slides the budget by
    factors of two: faster while the area estimate stays within
    (1 + margin) of the budgeted area, slower when it overshoots; gives up
    after 64 relaxations.
    """
    nf = target.nf if nf is None else nf
    r = rate_factors(app)
    if target.mode == "min-area":
        v_app = Fraction(target.v_tgt)
        est = estimate_area(app, lib, v_app, nf)
        if est is None:
            raise InfeasibleError(
                f"no selection meets inverse throughput {v_app}")
        return Budget(v_app, {n.id: v_app / r[n.id] for n in app.nodes},
                      target.margin, est)

    limit = (1 + target.margin) * target.area_budget
    base = propagate_rates(app, _fastest_assignment(app, lib)).achieved_v
    v = base
    relax = 0
    est = estimate_area(app, lib, v, nf)
    if est is not None and Fraction(est) <= limit:
        while relax < MAX_RELAXATIONS:
            faster = estimate_area(app, lib, v / 2, nf)
            if faster is None or Fraction(faster) > limit:
                break
            v = v / 2
            est = faster
            relax += 1
    else:
        while relax < MAX_RELAXATIONS:
            v = v * 2
            relax += 1
            est = estimate_area(app, lib, v, nf)
            if est is not None and Fraction(est) <= limit:
                break
        else:
            raise InfeasibleError(
                f"no budget within {MAX_RELAXATIONS} relaxations fits "
                f"area {target.area_budget}")
        if est is None or Fraction(est) > limit:
            raise InfeasibleError(
                f"no budget within {MAX_RELAXATIONS} relaxations fits "
                f"area {target.area_budget}")
    return Budget(v, {n.id: v / r[n.id] for n in app.nodes}, target.margin,
                  est, relax)


@dataclass
class TraceEntry:
    node: str
    action: str
    before_area: int
    after_area: int


@dataclass
class _Plan:
    selections: dict                 # node id -> Selection
    fusions: list = field(default_factory=list)

    def total_area(self, app, nf) -> int:
        node_area = sum(s.impl.area * s.replicas
                        for s in self.selections.values())
        return node_area + assignment_overhead(
            app, self.selections, tuple(self.fusions), nf)


def _walk_order(app: Application, bottleneck: str) -> list:
    """Bottleneck, its downstream cone, its upstream cone, then the rest in
    breadth-first source order. Deterministic by document order."""
    order = []
    seen = set()

    def bfs(start, edges_of):
        queue = [start]
        while queue:
            nid = queue.pop(0)
            if nid in seen:
                continue
            seen.add(nid)
            order.append(nid)
            queue.extend(edges_of(nid))

    bfs(bottleneck, lambda n: [c.consumer[0] for c in app.out_channels(n)])
    seen.discard(bottleneck)  # allow the backward pass through it
    bfs(bottleneck, lambda n: [c.producer[0] for c in app.in_channels(n)])
    for src in app.sources:
        bfs(src, lambda n: [c.consumer[0] for c in app.out_channels(n)])
    return order


def _try_combine(app, lib, plan: _Plan, budget: Budget, nid: str, nf: int,
                 trace: list) -> Optional[str]:
    """Attempt to fuse ``nid``'s producer with its replica groups; returns
    the producer id on acceptance (it may need a revisit)."""
    sel = plan.selections[nid]
    node = app.node(nid)
    if sel.replicas <= nf or node.num_out == 0:
        return None
    if any(f.consumer == nid for f in plan.fusions):
        return None
    in_channels = app.in_channels(nid)
    if len(in_channels) != 1:
        return None
    ch = in_channels[0]
    pid, out_port = ch.producer
    if any(f.producer == pid or f.consumer == pid for f in plan.fusions):
        return None
    producer = app.node(pid)
    p_sel = plan.selections[pid]
    if not all(x == 1 for x in producer.in_rates + producer.out_rates):
        return None
    r = rate_factors(app)
    v_stream = budget.v_app / (r[pid] * producer.out_rates[out_port])
    combo = combine_with_fork(lib.get(pid), p_sel.impl, p_sel.replicas,
                              consumer_v=sel.impl.ii * sel.replicas,
                              nr=sel.replicas, nf=nf, v_stream=v_stream,
                              producer_node=producer, out_port=out_port)
    if combo is None:
        return None
    before = plan.total_area(app, nf)
    candidate = _Plan(dict(plan.selections), list(plan.fusions))
    candidate.selections[pid] = Selection(combo.producer_impl,
                                          combo.producer_replicas)
    candidate.fusions.append(Fusion(pid, nid, nf))
    after = candidate.total_area(app, nf)
    if after >= before:
        trace.append(TraceEntry(nid, f"combine-with-{pid}-rejected",
                                before, before))
        return None
    plan.selections[pid] = candidate.selections[pid]
    plan.fusions.append(Fusion(pid, nid, nf))
    trace.append(TraceEntry(nid, f"combine-with-{pid}", before, after))
    return pid


def optimize(app: Application, lib: ImplementationLibrary,
             target: OptimizationTarget, nf: Optional[int] = None):
    """Full heuristic pass; returns (Assignment, trace list)."""
    nf = target.nf if nf is None else nf
    r = rate_factors(app)
    relax_left = MAX_RELAXATIONS
    budget = budget_throughput(app, lib, target, nf)

    while True:
        fastest = _fastest_assignment(app, lib)
        report = slack_and_weights(propagate_rates(app, fastest), app,
                                   budget.v_app)
        bottleneck = find_bottleneck(report)
        order = _walk_order(app, bottleneck)

        trace: list = []
        plan = _Plan({})
        for nid in order:
            choice = _greedy_choice(app, lib, nid, r[nid], budget.v_app, nf)
            if choice is None:
                raise InfeasibleError(
                    f"node {nid!r} cannot meet inverse throughput "
                    f"{budget.v_app}")
            plan.selections[nid] = Selection(choice.impl, choice.replicas)
        base_area = plan.total_area(app, nf)
        trace.append(TraceEntry(bottleneck, "budget-selection",
                                base_area, base_area))

        visits = {nid: 0 for nid in order}
        queue = list(order)
        while queue:
            nid = queue.pop(0)
            if visits[nid] >= 2:
                continue
            visits[nid] += 1
            producer = _try_combine(app, lib, plan, budget, nid, nf, trace)
            if producer is not None and producer not in queue:
                queue.append(producer)

        selections = tuple((n.id, plan.selections[n.id]) for n in app.nodes)
        overhead = assignment_overhead(app, plan.selections,
                                       tuple(plan.fusions), nf)
        draft = Assignment(selections, tuple(plan.fusions), overhead)
        achieved = propagate_rates(app, draft).achieved_v
        final = Assignment(selections, tuple(plan.fusions), overhead, achieved)

        if target.mode == "min-area":
            if achieved > Fraction(target.v_tgt):
                raise InfeasibleError(
                    f"walk result misses the target: {achieved} > "
                    f"{target.v_tgt}")
            return final, trace
        if final.total_area() <= target.area_budget:
            return final, trace
        # the overshoot was not repaid: relax and retry
        relax_left -= 1
        if relax_left <= 0:
            raise InfeasibleError(
                f"could not repay the overshoot within area "
                f"{target.area_budget}")
        budget = Budget(budget.v_app * 2,
                        {n.id: budget.v_app * 2 / r[n.id] for n in app.nodes},
                        budget.margin,
                        estimate_area(app, lib, budget.v_app * 2, nf) or 0,
                        budget.relaxations + 1)


def trace_json(trace: list) -> str:
    import json
    return json.dumps(
        [{"node": t.node, "action": t.action, "before_area": t.before_area,
          "after_area": t.after_area} for t in trace],
        indent=2) + "\n"
