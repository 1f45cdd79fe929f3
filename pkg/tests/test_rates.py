from fractions import Fraction

import pytest

from stgscale.errors import StructuralError
from stgscale.fixtures import load_fixture
from stgscale.internode import build_library
from stgscale.model import (
    Application,
    Assignment,
    Channel,
    CompositeNode,
    Implementation,
    Selection,
)
from stgscale.rates import (
    find_bottleneck,
    format_v,
    node_port_rates,
    propagate_rates,
    rate_report_csv,
    slack_and_weights,
)


def impl(owner, area, ii):
    return Implementation(owner, f"i{ii}", area, ii, "library")


def select(*pairs):
    return Assignment(tuple(
        (nid, Selection(impl(nid, 1, ii), nr)) for nid, ii, nr in pairs))


def unit_chain():
    nodes = (CompositeNode("a", (), (1,), False),
             CompositeNode("b", (1,), (1,)),
             CompositeNode("c", (1,), (1,)))
    channels = (Channel(("a", 0), ("b", 0)), Channel(("b", 0), ("c", 0)))
    return Application(nodes, channels)


def test_node_port_rates_examples(jpeg, jpeg_lib, rates3):
    dct_v5 = jpeg_lib.find("dct", "v5")
    v_in, v_out = node_port_rates(dct_v5, jpeg.app.node("dct"))
    assert v_in == (32,) and v_out == (32,)

    unit = impl("b", 1, 1)
    v_in, v_out = node_port_rates(unit, unit_chain().node("b"))
    assert v_in == (1,) and v_out == (1,)

    lib3 = build_library(rates3.app, 4, rates3.library)
    v_in, v_out = node_port_rates(lib3.find("work", "v2"),
                                  rates3.app.node("work"))
    assert v_in == (Fraction(3),) and v_out == (Fraction(2),)


def test_node_port_rates_owner_checked(jpeg, jpeg_lib):
    with pytest.raises(StructuralError):
        node_port_rates(jpeg_lib.find("dct", "v1"), jpeg.app.node("cc"))


def test_propagate_unit_chain():
    app = unit_chain()
    report = propagate_rates(app, select(("a", 1, 1), ("b", 1, 1),
                                         ("c", 1, 1)))
    assert report.achieved_v == 1
    for cr in report.channels.values():
        assert cr.provided_v == 1
        assert cr.expected_v == 1


def test_propagate_two_input_relation():
    # inputs arriving at intervals 3 (consuming 2) and 4 (consuming 1),
    # producing 2: output interval = min(3*2, 4*1) / 2 = 2
    nodes = (CompositeNode("p", (), (1, 1), False),
             CompositeNode("q", (1,), (2,)),
             CompositeNode("m", (2, 1), (2,)),
             CompositeNode("z", (1,), ()))
    channels = (Channel(("p", 0), ("q", 0)),
                Channel(("q", 0), ("m", 0)),
                Channel(("p", 1), ("m", 1)),
                Channel(("m", 0), ("z", 0)))
    app = Application(nodes, channels)
    asg = select(("p", 4, 1), ("q", 6, 1), ("m", 1, 1), ("z", 1, 1))
    report = propagate_rates(app, asg)
    # p fires every 4: port0 v=4 into q (In 2 -> fires every 8, Out 2 -> v 4);
    # wait: q consumes 1 (rate 1) -> v_in 4, out rate 2 -> v_out = 4/2 = 2;
    # m's input 0 sees max(own 1/2, arriving 2)=2 with In 2 -> 4;
    # input 1 sees max(own 1, arriving 4)=4 with In 1 -> 4;
    # v_out = min(4, 4)/2 = 2
    assert report.channels["m.0->z.0"].provided_v == 2


def test_propagate_jpeg_reconciled_target_four(jpeg, jpeg_lib):
    sels = (("cc", Selection(jpeg_lib.find("cc", "v3"), 1)),
            ("dct", Selection(jpeg_lib.find("dct", "v3"), 1)),
            ("quant", Selection(jpeg_lib.find("quant", "v3"), 1)),
            ("enc", Selection(jpeg_lib.find("enc", "v1"), 128)))
    report = propagate_rates(jpeg.app, Assignment(sels))
    assert report.achieved_v == 4


def test_slack_and_weights_all_exact():
    app = unit_chain()
    report = slack_and_weights(
        propagate_rates(app, select(("a", 1, 1), ("b", 1, 1), ("c", 1, 1))),
        app, Fraction(1))
    for cr in report.channels.values():
        assert cr.slack == 0
    for nr in report.nodes.values():
        assert nr.weight == 1


def test_slack_and_weights_slow_consumer():
    # a (interval 1) feeding b (interval 8) with target 2: the channel can
    # only run every 8 cycles, 6 slower than required; b is 4x too slow
    nodes = (CompositeNode("a", (), (1,), False), CompositeNode("b", (1,), (1,)))
    app = Application(nodes, (Channel(("a", 0), ("b", 0)),))
    report = slack_and_weights(
        propagate_rates(app, select(("a", 1, 1), ("b", 8, 1))), app,
        Fraction(2))
    cr = report.channels["a.0->b.0"]
    assert cr.provided_v == 8
    assert cr.required_v == 2
    assert cr.slack == 6
    assert report.nodes["b"].weight == 4


def test_jpeg_bottleneck_is_the_encoder(jpeg, jpeg_lib):
    fastest = Assignment(tuple(
        (nid, Selection(jpeg_lib.get(nid)[0], 1))
        for nid in ("cc", "dct", "quant", "enc")))
    report = slack_and_weights(propagate_rates(jpeg.app, fastest), jpeg.app,
                               Fraction(1))
    assert report.nodes["enc"].weight == 512
    assert max(nr.weight for nr in report.nodes.values()) == 512
    assert find_bottleneck(report) == "enc"


def test_bottleneck_tie_breaks_in_document_order():
    app = unit_chain()
    report = slack_and_weights(
        propagate_rates(app, select(("a", 1, 1), ("b", 1, 1), ("c", 1, 1))),
        app, Fraction(1))
    assert find_bottleneck(report) == "a"


def test_bottleneck_moves_after_replication(jpeg, jpeg_lib):
    sels = (("cc", Selection(jpeg_lib.find("cc", "v1"), 1)),
            ("dct", Selection(jpeg_lib.find("dct", "v1"), 1)),
            ("quant", Selection(jpeg_lib.find("quant", "v1"), 1)),
            ("enc", Selection(jpeg_lib.find("enc", "v1"), 512)))
    report = slack_and_weights(propagate_rates(jpeg.app, Assignment(sels)),
                               jpeg.app, Fraction(1))
    assert all(nr.weight == 1 for nr in report.nodes.values())
    assert find_bottleneck(report) == "cc"


def test_required_v_scales_linearly_with_target(jpeg, jpeg_lib):
    fastest = Assignment(tuple(
        (nid, Selection(jpeg_lib.get(nid)[0], 1))
        for nid in ("cc", "dct", "quant", "enc")))
    r1 = slack_and_weights(propagate_rates(jpeg.app, fastest), jpeg.app,
                           Fraction(3))
    r2 = slack_and_weights(propagate_rates(jpeg.app, fastest), jpeg.app,
                           Fraction(6))
    for key in r1.channels:
        assert r2.channels[key].required_v == 2 * r1.channels[key].required_v


def test_output_rates_monotone_in_input_rates():
    # slowing any input never speeds up any downstream channel
    nodes = (CompositeNode("a", (), (1,), False),
             CompositeNode("b", (1,), (1,)),
             CompositeNode("c", (1,), (1,)))
    app = Application(nodes, (Channel(("a", 0), ("b", 0)),
                              Channel(("b", 0), ("c", 0))))
    slow = propagate_rates(app, select(("a", 4, 1), ("b", 1, 1), ("c", 1, 1)))
    fast = propagate_rates(app, select(("a", 2, 1), ("b", 1, 1), ("c", 1, 1)))
    for key in slow.channels:
        assert slow.channels[key].provided_v >= fast.channels[key].provided_v


def test_weight_flags_misses_exactly(jpeg, jpeg_lib):
    from stgscale.exact import solve_min_area
    a = solve_min_area(jpeg.app, jpeg_lib, 2, 4)
    report = slack_and_weights(propagate_rates(jpeg.app, a), jpeg.app,
                               Fraction(2))
    # achieved == target: no node may be flagged too slow
    assert report.achieved_v == 2
    assert all(nr.weight <= 1 for nr in report.nodes.values())
    tight = slack_and_weights(propagate_rates(jpeg.app, a), jpeg.app,
                              Fraction(1))
    assert any(nr.weight > 1 for nr in tight.nodes.values())


def test_format_v_fixed_six_digits():
    assert format_v(Fraction(1)) == "1.000000"
    assert format_v(Fraction(1, 3)) == "0.333333"
    assert format_v(Fraction(2, 3)) == "0.666667"
    assert format_v(Fraction(512)) == "512.000000"


def test_rate_report_csv_shape(jpeg, jpeg_lib):
    fastest = Assignment(tuple(
        (nid, Selection(jpeg_lib.get(nid)[0], 1))
        for nid in ("cc", "dct", "quant", "enc")))
    report = slack_and_weights(propagate_rates(jpeg.app, fastest), jpeg.app,
                               Fraction(1))
    text = rate_report_csv(report)
    lines = text.splitlines()
    assert lines[0] == "kind,id,required_v,provided_v,slack,expected_v"
    assert sum(1 for ln in lines if ln.startswith("channel,")) == 3
    assert sum(1 for ln in lines if ln.startswith("node,")) == 4
