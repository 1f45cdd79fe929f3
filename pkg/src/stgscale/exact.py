"""Exact module selection + replication by depth-first branch-and-bound.

Both optimization modes are solved without node combining. For each node the
feasible choices are (implementation, minimal replica count meeting the
propagated requirement); the search branches over library entries in
ascending area, bounds with the sum of per-node minima of the remaining
nodes, and tie-breaks on the lexicographically smallest choice vector
(library index order), independent of exploration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from stgscale.errors import InfeasibleError, StructuralError
from stgscale.model import (
    Application,
    Assignment,
    ImplementationLibrary,
    Selection,
    rate_factors,
)
from stgscale.rates import propagate_rates
from stgscale.replicate import assignment_overhead, replica_count, tree_overhead


@dataclass
class _Choice:
    lib_index: int
    impl: object
    replicas: int
    cost: int          # node area + tree overhead of this choice


def _node_choices(app: Application, lib: ImplementationLibrary, nid: str,
                  r: Fraction, v_tgt: Fraction, nf: int) -> list:
    node = app.node(nid)
    budget = Fraction(v_tgt) / r  # allowed firing interval
    n_in = len(app.in_channels(nid))
    sides = n_in + node.num_out
    choices = []
    unit_rates = all(x == 1 for x in node.in_rates + node.out_rates)
    for idx, impl in enumerate(lib.get(nid)):
        nr = replica_count(impl.ii, budget)
        if nr > 1 and (not node.stateless or not unit_rates):
            continue
        overhead = tree_overhead(nr, nf) * sides if nr > 1 else 0
        choices.append(_Choice(idx, impl, nr, impl.area * nr + overhead))
    return choices


def solve_min_area(app: Application, lib: ImplementationLibrary,
                   v_tgt, nf: int = 4) -> Assignment:
    """Minimum-total-area assignment meeting the throughput target.

    The achieved inverse throughput of the result is verified by rate
    propagation before returning.
    """
    v_tgt = Fraction(v_tgt)
    if v_tgt <= 0:
        raise StructuralError("throughput target must be positive")
    r = rate_factors(app)
    order = [n.id for n in app.nodes]
    per_node = []
    for nid in order:
        choices = _node_choices(app, lib, nid, r[nid], v_tgt, nf)
        if not choices:
            raise InfeasibleError(
                f"node {nid!r} cannot meet inverse throughput "
                f"{v_tgt} with any implementation")
        per_node.append(sorted(choices, key=lambda c: c.impl.area))
    suffix_min = [0] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        suffix_min[i] = suffix_min[i + 1] + min(c.cost for c in per_node[i])

    best_cost: Optional[int] = None
    best_vec: Optional[tuple] = None
    best_sel: Optional[list] = None
    stack_sel: list = []
    stack_vec: list = []

    def dfs(i: int, cost: int):
        nonlocal best_cost, best_vec, best_sel
        if best_cost is not None and cost + suffix_min[i] > best_cost:
            return
        if i == len(order):
            vec = tuple(stack_vec)
            if (best_cost is None or cost < best_cost
                    or (cost == best_cost and vec < best_vec)):
                best_cost = cost
                best_vec = vec
                best_sel = list(stack_sel)
            return
        for choice in per_node[i]:
            stack_sel.append(choice)
            stack_vec.append(choice.lib_index)
            dfs(i + 1, cost + choice.cost)
            stack_sel.pop()
            stack_vec.pop()

    dfs(0, 0)
    selections = tuple(
        (nid, Selection(choice.impl, choice.replicas))
        for nid, choice in zip(order, best_sel))
    overhead = assignment_overhead(app, dict(selections), (), nf)
    draft = Assignment(selections, (), overhead)
    report = propagate_rates(app, draft)
    if report.achieved_v > v_tgt:
        raise InfeasibleError(
            f"search result misses the target: {report.achieved_v} > {v_tgt}")
    return Assignment(selections, (), overhead, report.achieved_v)


def candidate_targets(app: Application, lib: ImplementationLibrary,
                      area_budget: int) -> list:
    """Achievable application inverse throughputs: library intervals scaled
    by every replica count the area budget permits."""
    r = rate_factors(app)
    values = set()
    for node in app.nodes:
        for impl in lib.get(node.id):
            nr_max = max(1, area_budget // impl.area)
            if not node.stateless:
                nr_max = 1
            for nr in range(1, nr_max + 1):
                values.add(Fraction(impl.ii, nr) * r[node.id])
    return sorted(values)


def solve_max_throughput(app: Application, lib: ImplementationLibrary,
                         area_budget: int, nf: int = 4) -> Assignment:
    """Fastest assignment whose total area fits the budget.

    Binary search over the finite candidate target set; minimum area is
    monotone in the target, so the smallest feasible candidate wins.
    """
    floor_area = 0
    for node in app.nodes:
        floor_area += min(impl.area for impl in lib.get(node.id))
    if floor_area > area_budget:
        raise InfeasibleError(
            f"area budget {area_budget} is below the minimal assignment "
            f"({floor_area})")
    candidates = candidate_targets(app, lib, area_budget)

    def fits(v) -> Optional[Assignment]:
        try:
            a = solve_min_area(app, lib, v, nf)
        except InfeasibleError:
            return None
        return a if a.total_area() <= area_budget else None

    lo, hi = 0, len(candidates) - 1
    best: Optional[Assignment] = None
    while lo <= hi:
        mid = (lo + hi) // 2
        a = fits(candidates[mid])
        if a is not None:
            best = a
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:  # pragma: no cover - floor fit guarantees a solution
        raise InfeasibleError("no candidate target fits the budget")
    return best


def dump_lp(app: Application, lib: ImplementationLibrary, v_tgt,
            nf: int = 4) -> str:
    """The minimum-area instance as LP-format text (external cross-checking
    aid; selection variables are binary, replica counts are pre-resolved)."""
    v_tgt = Fraction(v_tgt)
    r = rate_factors(app)
    terms = []
    rows = []
    for node in app.nodes:
        names = []
        for choice in _node_choices(app, lib, node.id, r[node.id], v_tgt, nf):
            var = f"x_{node.id}_{choice.impl.version_tag}"
            terms.append(f"{choice.cost} {var}")
            names.append(var)
        rows.append((node.id, names))
    lines = ["\\ minimize total area at inverse throughput target "
             f"{v_tgt} (fan limit {nf})", "Minimize", " obj: " + " + ".join(terms),
             "Subject To"]
    for nid, names in rows:
        lines.append(f" pick_{nid}: " + " + ".join(names) + " = 1")
    lines.append("Binary")
    for _, names in rows:
        for var in names:
            lines.append(f" {var}")
    lines.append("End")
    return "\n".join(lines) + "\n"
