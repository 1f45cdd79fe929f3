from fractions import Fraction

import pytest

from stgscale.errors import StructuralError
from stgscale.model import (
    Application,
    Assignment,
    Channel,
    CompositeNode,
    Implementation,
    ImplementationLibrary,
    Selection,
    is_pareto_clean,
    pareto_clean,
    rate_factors,
    total_area,
    validate_application,
)


def unit_node(nid, n_in=1, n_out=1, stateless=True):
    return CompositeNode(nid, (1,) * n_in, (1,) * n_out, stateless)


def chain_app():
    nodes = (unit_node("a", 0, 1, stateless=False), unit_node("b"),
             unit_node("c"))
    channels = (Channel(("a", 0), ("b", 0)), Channel(("b", 0), ("c", 0)))
    return Application(nodes, channels)


def test_minimal_chain_is_valid():
    report = validate_application(chain_app())
    assert report.ok, [v.message for v in report.violations]


def test_cycle_is_rejected():
    nodes = (unit_node("a"), unit_node("b"))
    channels = (Channel(("a", 0), ("b", 0)), Channel(("b", 0), ("a", 0)))
    report = validate_application(Application(nodes, channels))
    codes = {v.code for v in report.violations}
    assert "cycle" in codes
    msg = next(v.message for v in report.violations if v.code == "cycle")
    assert "a" in msg and "b" in msg


def test_rate_inconsistent_diamond():
    # top path doubles the rate, bottom path keeps it: the join node sees
    # cumulative factors 2 vs 1
    nodes = (unit_node("s", 0, 2, stateless=False),
             CompositeNode("top", (1,), (2,)),
             unit_node("bot"),
             CompositeNode("j", (1, 1), (1,)))
    channels = (Channel(("s", 0), ("top", 0)), Channel(("s", 1), ("bot", 0)),
                Channel(("top", 0), ("j", 0)), Channel(("bot", 0), ("j", 1)))
    report = validate_application(Application(nodes, channels))
    assert any(v.code == "rate-inconsistency" for v in report.violations)


def test_unconnected_input_port_flagged():
    nodes = (unit_node("a", 0, 1, stateless=False), unit_node("b", 2, 1))
    channels = (Channel(("a", 0), ("b", 0)),)
    report = validate_application(Application(nodes, channels))
    assert any(v.code == "port" for v in report.violations)


def test_stateless_generator_source_flagged():
    nodes = (unit_node("a", 0, 1, stateless=True), unit_node("b"))
    channels = (Channel(("a", 0), ("b", 0)),)
    report = validate_application(Application(nodes, channels))
    assert any(v.code == "stateless-source" for v in report.violations)


def test_reserved_prefix_rejected():
    nodes = (unit_node("__fj_x", 0, 1, stateless=False), unit_node("b"))
    channels = (Channel(("__fj_x", 0), ("b", 0)),)
    report = validate_application(Application(nodes, channels))
    assert any(v.code == "reserved-id" for v in report.violations)


def test_rate_factors_chain_with_rates():
    nodes = (unit_node("g", 0, 1, stateless=False),
             CompositeNode("w", (2,), (3,)), unit_node("k"))
    channels = (Channel(("g", 0), ("w", 0)), Channel(("w", 0), ("k", 0)))
    r = rate_factors(Application(nodes, channels))
    assert r["g"] == 1
    assert r["w"] == Fraction(1, 2)
    assert r["k"] == Fraction(3, 2)


def impl(owner, tag, area, ii):
    return Implementation(owner, tag, area, ii, "library")


def test_total_area_is_node_plus_overhead():
    # published solution shape: the node subtotal reconciles with the table's
    # printed total only together with its (opaque) overhead column
    selections = (
        ("cc", Selection(impl("cc", "v1", 512, 1), 1)),
        ("dct", Selection(impl("dct", "v1", 800, 1), 1)),
        ("quant", Selection(impl("quant", "v1", 512, 1), 1)),
        ("enc", Selection(impl("enc", "v1", 22, 512), 512)),
    )
    a = Assignment(selections, (), overhead_area=10880)
    assert a.node_area() == 13088
    assert total_area(a) == 23968


def test_total_area_trivial_and_tree_case():
    single = Assignment((("x", Selection(impl("x", "v1", 7, 3), 1)),))
    assert total_area(single) == 7
    # one node area 50 replicated x16 behind one fork and one join tree of
    # five nodes each
    rep = Assignment((("x", Selection(impl("x", "v1", 50, 2), 16)),),
                     overhead_area=10)
    assert total_area(rep) == 810


def test_total_area_checks_library_references():
    lib = ImplementationLibrary((("x", (impl("x", "v1", 7, 3),)),))
    good = Assignment((("x", Selection(impl("x", "v1", 7, 3), 1)),))
    assert total_area(good, lib) == 7
    dangling = Assignment((("x", Selection(impl("x", "v9", 7, 3), 1)),))
    with pytest.raises(StructuralError):
        total_area(dangling, lib)


def test_total_area_additive_order_independent():
    sels = [("a", Selection(impl("a", "v1", 3, 1), 2)),
            ("b", Selection(impl("b", "v1", 5, 1), 1))]
    fwd = Assignment(tuple(sels), (), 4)
    rev = Assignment(tuple(reversed(sels)), (), 4)
    assert total_area(fwd) == total_area(rev) == 3 * 2 + 5 + 4


def test_pareto_clean_keeps_strictly_better_points():
    points = [impl("x", "a", 10, 1), impl("x", "b", 5, 2),
              impl("x", "c", 5, 3), impl("x", "d", 7, 2),
              impl("x", "e", 1, 9)]
    cleaned = pareto_clean(points)
    assert [(p.ii, p.area) for p in cleaned] == [(1, 10), (2, 5), (9, 1)]
    assert is_pareto_clean(cleaned)


def test_fixture_documents_validate(jpeg, nbody, chain3, diamond, rates3):
    for fx in (jpeg, nbody, chain3, diamond, rates3):
        assert validate_application(fx.app).ok
