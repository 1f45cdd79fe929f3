import json
import random

import pytest

from stgscale.fixtures import load_fixture
from stgscale.frontend import (
    DocumentError,
    parse_assignment,
    parse_document,
    serialize_assignment,
)

MINIMAL = """{
  "nodes": [
    {"id": "src", "in_rates": [], "out_rates": [1], "stateless": false},
    {"id": "snk", "in_rates": [1], "out_rates": [1]}
  ],
  "channels": [
    {"from": ["src", 0], "to": ["snk", 0]}
  ]
}
"""


def test_minimal_document():
    doc = parse_document(MINIMAL)
    assert [n.id for n in doc.app.nodes] == ["src", "snk"]
    assert len(doc.app.channels) == 1
    assert doc.library is None


def test_jpeg_fixture_shape():
    fx = load_fixture("jpeg")
    assert len(fx.app.nodes) == 4
    assert len(fx.app.channels) == 3
    sizes = {nid: len(fx.library.get(nid)) for nid in fx.library.node_ids()}
    assert sizes == {"cc": 4, "dct": 5, "quant": 5, "enc": 1}


def test_unknown_reference_has_span():
    text = MINIMAL.replace('"to": ["snk", 0]', '"to": ["snkk", 0]')
    with pytest.raises(DocumentError) as exc:
        parse_document(text)
    errors = exc.value.errors
    assert len(errors) == 1
    assert errors[0].kind == "unknown-reference"
    assert "snkk" in errors[0].message
    # the span points at a non-whitespace token of the offending construct
    line = text.splitlines()[errors[0].span.line - 1]
    assert line.strip()
    assert line[errors[0].span.column - 1] not in " \t"


def test_duplicate_node_id():
    text = MINIMAL.replace('"id": "snk"', '"id": "src"')
    with pytest.raises(DocumentError) as exc:
        parse_document(text)
    assert any(e.kind == "duplicate-id" for e in exc.value.errors)


def test_syntax_error_positions():
    with pytest.raises(DocumentError) as exc:
        parse_document('{"nodes": [}')
    err = exc.value.errors[0]
    assert err.kind == "syntax"
    assert err.span.line == 1
    assert err.span.column == 12


def test_unknown_key_strict_vs_lax():
    text = MINIMAL.replace('"stateless": false',
                           '"stateless": false, "color": 3')
    with pytest.raises(DocumentError):
        parse_document(text)
    doc = parse_document(text, lax=True)
    assert doc.app.has_node("src")


def test_floats_rejected():
    text = MINIMAL.replace('"out_rates": [1],', '"out_rates": [1.5],')
    with pytest.raises(DocumentError) as exc:
        parse_document(text)
    assert any("integer" in e.message for e in exc.value.errors)


def test_independent_errors_collected():
    text = MINIMAL.replace('"from": ["src", 0]', '"from": ["srcc", 0]')
    text = text.replace('"to": ["snk", 0]', '"to": ["snkk", 0]')
    with pytest.raises(DocumentError) as exc:
        parse_document(text)
    assert len(exc.value.errors) >= 2


def test_deterministic_parse():
    a = parse_document(MINIMAL)
    b = parse_document(MINIMAL)
    assert [n.id for n in a.app.nodes] == [n.id for n in b.app.nodes]
    assert a.app.channels == b.app.channels


def test_fuzzing_never_crashes():
    rng = random.Random(20240811)
    base = load_fixture("jpeg").text.encode()
    for _ in range(400):
        data = bytearray(base)
        for _ in range(rng.randint(1, 6)):
            pos = rng.randrange(len(data))
            data[pos] = rng.randrange(256)
        try:
            parse_document(bytes(data).decode("utf-8", errors="replace"))
        except DocumentError:
            pass  # the only acceptable failure mode


def _assignment_doc():
    from stgscale.cli import assignment_document
    from stgscale.exact import solve_min_area
    from stgscale.internode import build_library

    fx = load_fixture("jpeg")
    lib = build_library(fx.app, 4, fx.library)
    a = solve_min_area(fx.app, lib, 8, 4)
    return assignment_document(fx.document, a, 4)


def test_assignment_round_trip_is_byte_identical():
    doc = _assignment_doc()
    text = serialize_assignment(doc)
    again = serialize_assignment(parse_assignment(text))
    assert text == again


def test_assignment_structure_uses_reserved_prefix():
    doc = _assignment_doc()
    assert doc.structure_nodes, "replicated assignment must carry structure"
    kinds = {n.kind for n in doc.structure_nodes}
    assert kinds <= {"REPLICA", "FORK", "JOIN"}
    assert all(n.id.startswith("__fj_") for n in doc.structure_nodes)
    assert {"FORK", "JOIN"} <= kinds


def test_empty_assignment_rejected():
    doc = _assignment_doc()
    obj = json.loads(serialize_assignment(doc))
    obj["selections"] = []
    with pytest.raises(DocumentError):
        parse_assignment(json.dumps(obj))


def test_assignment_total_area_consistency_checked():
    doc = _assignment_doc()
    obj = json.loads(serialize_assignment(doc))
    obj["areas"]["total_area"] += 1
    with pytest.raises(DocumentError):
        parse_assignment(json.dumps(obj))
