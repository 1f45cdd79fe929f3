"""Command-line surface: analyze, optimize, simulate, pareto.

Exit status is the machine contract: 0 success, 1 infeasible target,
2 parse/validation error, 3 internal invariant failure. All file outputs
are byte-reproducible for identical inputs and flags.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from stgscale.errors import InfeasibleError, InternalError, StgError
from stgscale.exact import solve_min_area, solve_max_throughput
from stgscale.frontend import (
    AssignmentDocument,
    Document,
    DocumentError,
    parse_assignment,
    parse_document_file,
    serialize_assignment,
)
from stgscale.heuristic import optimize as heuristic_optimize
from stgscale.heuristic import trace_json
from stgscale.internode import build_library
from stgscale.intranode import library_csv
from stgscale.model import Assignment, OptimizationTarget
from stgscale.rates import (
    find_bottleneck,
    format_v,
    propagate_rates,
    rate_report_csv,
    slack_and_weights,
)
from stgscale.sim.engine import (
    check_equivalence,
    dump_sink_streams,
    sim_report_csv,
    simulate,
)
from stgscale.sim.plan import build_app_plan, plan_structure

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INVALID = 2
EXIT_INTERNAL = 3


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def _load(path: str, lax: bool) -> Document:
    return parse_document_file(path, lax=lax)


def _fastest_assignment(doc: Document, nf: int) -> Assignment:
    from stgscale.heuristic import _fastest_assignment as fastest
    lib = build_library(doc.app, nf, doc.library)
    return fastest(doc.app, lib)


def assignment_document(doc: Document, assignment: Assignment,
                        nf: int) -> AssignmentDocument:
    """Serializable assignment view including the expanded structure."""
    plan = build_app_plan(doc.app, assignment, n_tokens=1, capacity=2, nf=nf)
    nodes, channels = plan_structure(plan)
    out = AssignmentDocument(
        selections=[{"node": nid, "impl": s.impl.version_tag,
                     "area": s.impl.area, "ii": s.impl.ii,
                     "replicas": s.replicas}
                    for nid, s in assignment.selections],
        fusions=[{"producer": f.producer, "consumer": f.consumer,
                  "group": f.group} for f in assignment.fusions],
        node_area=assignment.node_area(),
        overhead_area=assignment.overhead_area,
        total_area=assignment.total_area(),
        achieved_v=assignment.achieved_v,
        structure_nodes=nodes,
        structure_channels=channels,
    )
    return out


def _assignment_from_doc(doc: Document, adoc: AssignmentDocument) -> Assignment:
    asg = adoc.to_assignment()
    for nid, _sel in asg.selections:
        if not doc.app.has_node(nid):
            raise DocumentError([])
    return asg


def cmd_analyze(args) -> int:
    doc = _load(args.file, args.lax)
    nf = args.nf
    lib = build_library(doc.app, nf, doc.library)
    assignment = _fastest_assignment(doc, nf)
    report = slack_and_weights(propagate_rates(doc.app, assignment), doc.app,
                               Fraction(args.target_v))
    bottleneck = find_bottleneck(report)
    csv_text = rate_report_csv(report)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    if args.export_library:
        lines = []
        for nid in lib.node_ids():
            for row in library_csv(lib.get(nid)).splitlines()[1:]:
                lines.append(f"{nid},{row}")
        with open(args.export_library, "w", encoding="utf-8") as fh:
            fh.write("node,version_tag,ii,area,provenance\n"
                     + "\n".join(lines) + "\n")
    print(f"bottleneck: {bottleneck} "
          f"(weight {format_v(report.nodes[bottleneck].weight)})")
    print(f"achieved_v (fastest impls): {format_v(report.achieved_v)}")
    print(f"rate report: {args.out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    doc = _load(args.file, args.lax)
    nf = args.nf
    lib = build_library(doc.app, nf, doc.library)
    if args.mode == "min-area":
        if args.target_v is None:
            return _fail(EXIT_INVALID, "min-area mode needs --target-v")
        target = OptimizationTarget("min-area", v_tgt=Fraction(args.target_v),
                                    nf=nf, margin=Fraction(args.margin))
    else:
        if args.area is None:
            return _fail(EXIT_INVALID, "max-throughput mode needs --area")
        target = OptimizationTarget("max-throughput", area_budget=args.area,
                                    nf=nf, margin=Fraction(args.margin))

    trace = None
    if args.algorithm == "exact":
        if target.mode == "min-area":
            assignment = solve_min_area(doc.app, lib, target.v_tgt, nf)
        else:
            assignment = solve_max_throughput(doc.app, lib,
                                              target.area_budget, nf)
    else:
        assignment, trace = heuristic_optimize(doc.app, lib, target, nf)

    adoc = assignment_document(doc, assignment, nf)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_assignment(adoc))
    report_path = args.out + ".report.txt"
    lines = [f"algorithm: {args.algorithm}", f"mode: {target.mode}",
             f"fan limit: {nf}"]
    if target.mode == "min-area":
        lines.append(f"target inverse throughput: {target.v_tgt}")
    else:
        lines.append(f"area budget: {target.area_budget}")
    lines.append("")
    lines.append("node selections:")
    for nid, sel in assignment.selections:
        lines.append(f"  {nid}: {sel.impl.version_tag} "
                     f"(area {sel.impl.area}, ii {sel.impl.ii}) "
                     f"x {sel.replicas}")
    for f in assignment.fusions:
        lines.append(f"  fused: {f.producer} feeds {f.consumer} in groups "
                     f"of {f.group}")
    lines.append("")
    lines.append(f"node area:     {assignment.node_area()}")
    lines.append(f"overhead area: {assignment.overhead_area}")
    lines.append(f"total area:    {assignment.total_area()}")
    lines.append(f"achieved inverse throughput: "
                 f"{format_v(assignment.achieved_v)}")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    if trace is not None:
        with open(args.out + ".trace.json", "w", encoding="utf-8") as fh:
            fh.write(trace_json(trace))
    print(f"total area {assignment.total_area()}, achieved_v "
          f"{format_v(assignment.achieved_v)}")
    print(f"assignment: {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = _load(args.file, args.lax)
    assignment = None
    if args.assignment:
        with open(args.assignment, "r", encoding="utf-8") as fh:
            adoc = parse_assignment(fh.read())
        assignment = adoc.to_assignment()
        for nid, _sel in assignment.selections:
            if not doc.app.has_node(nid):
                return _fail(EXIT_INVALID,
                             f"assignment references unknown node {nid!r}")
    ref = simulate(doc.app, None, n_tokens=args.tokens,
                   fifo_capacity=args.capacity, nf=args.nf)
    if assignment is None:
        test = ref
    else:
        test = simulate(doc.app, assignment, n_tokens=args.tokens,
                        fifo_capacity=args.capacity, nf=args.nf)
    eq = check_equivalence(ref, test)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(sim_report_csv(test))
    if args.dump_streams:
        dump_sink_streams(test, args.dump_streams)
    print(f"cycles {test.cycles}, deadlock {test.deadlock}, "
          f"equivalent {eq.equal}")
    print(f"sim report: {args.out}")
    if not eq.equal:
        return _fail(EXIT_INTERNAL,
                     f"stream divergence at sink {eq.sink!r} index {eq.index}")
    return EXIT_OK


def cmd_pareto(args) -> int:
    doc = _load(args.file, args.lax)
    nf = args.nf
    lib = build_library(doc.app, nf, doc.library)
    targets = []
    if args.targets:
        targets = [int(x) for x in args.targets.split(",") if x.strip()]
    elif args.sweep:
        lo, hi = args.sweep.split(":", 1)
        targets = list(range(int(lo), int(hi) + 1))
    if not targets:
        return _fail(EXIT_INVALID, "no targets given")
    algorithms = (["exact", "heuristic"] if args.algorithms == "both"
                  else [args.algorithms])
    rows = ["target_v,algorithm,node_area,overhead_area,total_area,achieved_v"]
    for v in targets:
        for alg in algorithms:
            try:
                if alg == "exact":
                    a = solve_min_area(doc.app, lib, v, nf)
                else:
                    target = OptimizationTarget("min-area", v_tgt=Fraction(v),
                                                nf=nf)
                    a, _ = heuristic_optimize(doc.app, lib, target, nf)
            except InfeasibleError:
                rows.append(f"{v},{alg},,,,{'infeasible'}")
                continue
            rows.append(f"{v},{alg},{a.node_area()},{a.overhead_area},"
                        f"{a.total_area()},{format_v(a.achieved_v)}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"pareto table: {args.out}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stgscale",
        description="Space/time scaling of feed-forward streaming task graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="graph-description document")
        p.add_argument("--nf", type=int, default=4,
                       help="fan-in/fan-out limit (default 4)")
        p.add_argument("--lax", action="store_true",
                       help="ignore unknown document keys")

    p = sub.add_parser("analyze", help="validate and rate-analyze a document")
    common(p)
    p.add_argument("--target-v", type=int, default=1,
                   help="target used for slack/weight scoring (default 1)")
    p.add_argument("--out", default="rates.csv")
    p.add_argument("--export-library", default="",
                   help="also write the implementation library as CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="select implementations and replicas")
    common(p)
    p.add_argument("--mode", choices=["min-area", "max-throughput"],
                   required=True)
    p.add_argument("--target-v", type=int, default=None)
    p.add_argument("--area", type=int, default=None)
    p.add_argument("--algorithm", choices=["exact", "heuristic"],
                   default="heuristic")
    p.add_argument("--margin", type=str, default="1/10",
                   help="transient overshoot fraction (default 1/10)")
    p.add_argument("--out", default="assignment.json")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="cycle-level validation run")
    common(p)
    p.add_argument("assignment", nargs="?", default="",
                   help="assignment document (omit for the identity run)")
    p.add_argument("--tokens", type=int, default=10000)
    p.add_argument("--capacity", type=int, default=2)
    p.add_argument("--out", default="sim.csv")
    p.add_argument("--dump-streams", default="",
                   help="base path for binary sink stream dumps")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pareto", help="sweep targets with both optimizers")
    common(p)
    p.add_argument("--targets", default="",
                   help="comma-separated inverse throughput targets")
    p.add_argument("--sweep", default="", help="inclusive range lo:hi")
    p.add_argument("--algorithms", choices=["exact", "heuristic", "both"],
                   default="both")
    p.add_argument("--out", default="pareto.csv")
    p.set_defaults(func=cmd_pareto)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DocumentError as exc:
        for err in exc.errors:
            print(str(err), file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        return _fail(EXIT_INVALID, str(exc))
    except InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, f"infeasible: {exc}")
    except InternalError as exc:
        return _fail(EXIT_INTERNAL, f"internal error: {exc}")
    except StgError as exc:
        return _fail(EXIT_INVALID, str(exc))


if __name__ == "__main__":
    sys.exit(main())
