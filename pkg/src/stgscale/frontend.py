"""Graph-description document frontend.

Documents are a single JSON-syntax file with top-level keys "profile",
"nodes", "channels" and "library". The reader tracks source positions so
every diagnostic points at the offending token, collects all independent
errors instead of stopping at the first, and rejects unknown keys unless
lax mode is requested. Numbers in documents are integers only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from stgscale import model
from stgscale.model import (
    Application,
    Assignment,
    Channel,
    CompositeNode,
    Fusion,
    GENERATED_PREFIX,
    Implementation,
    ImplementationLibrary,
    OpGraph,
    OpKind,
    OpNode,
    Selection,
    resolve_profile,
    validate_application,
)

_MAX_DEPTH = 200


@dataclass(frozen=True)
class SourceSpan:
    line: int    # 1-based
    column: int  # 1-based
    offset: int  # byte offset into the document

    def __str__(self):
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    kind: str  # syntax | unknown-reference | duplicate-id | schema-violation
    message: str

    def __str__(self):
        return f"{self.span}: {self.kind}: {self.message}"


class DocumentError(Exception):
    """Raised when a document cannot be loaded; carries every error found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


@dataclass
class Document:
    app: Application
    library: Optional[ImplementationLibrary]
    profile: dict


# ---------------------------------------------------------------------------
# position-tracking JSON reader
# ---------------------------------------------------------------------------

@dataclass
class _JVal:
    kind: str  # object | array | string | int | float | bool | null
    value: object
    span: SourceSpan


class _Syntax(Exception):
    def __init__(self, error: ParseError):
        self.error = error


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.dup_errors: list = []

    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, self.pos)

    def fail(self, message: str, span: Optional[SourceSpan] = None):
        raise _Syntax(ParseError(span or self.span(), "syntax", message))

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.advance()

    def expect(self, ch: str):
        if self.peek() != ch:
            got = repr(self.peek()) if self.peek() else "end of input"
            self.fail(f"expected {ch!r}, found {got}")
        self.advance()

    def value(self, depth: int = 0) -> _JVal:
        if depth > _MAX_DEPTH:
            self.fail("document nested too deeply")
        self.skip_ws()
        start = self.span()
        ch = self.peek()
        if ch == "":
            self.fail("unexpected end of input")
        if ch == "{":
            return self._object(start, depth)
        if ch == "[":
            return self._array(start, depth)
        if ch == '"':
            return _JVal("string", self._string(), start)
        if ch == "-" or ch.isdigit():
            return self._number(start)
        for word, kind, val in (("true", "bool", True), ("false", "bool", False),
                                ("null", "null", None)):
            if self.text.startswith(word, self.pos):
                for _ in word:
                    self.advance()
                return _JVal(kind, val, start)
        self.fail(f"unexpected character {ch!r}")

    def _object(self, start: SourceSpan, depth: int) -> _JVal:
        self.expect("{")
        pairs = []
        keys = {}
        self.skip_ws()
        if self.peek() == "}":
            self.advance()
            return _JVal("object", pairs, start)
        while True:
            self.skip_ws()
            key_span = self.span()
            if self.peek() != '"':
                self.fail("expected a string key")
            key = self._string()
            self.skip_ws()
            self.expect(":")
            val = self.value(depth + 1)
            if key in keys:
                self.dup_errors.append(ParseError(
                    key_span, "duplicate-id", f"duplicate key {key!r}"))
            else:
                keys[key] = val
                pairs.append((key, key_span, val))
            self.skip_ws()
            if self.peek() == ",":
                self.advance()
                continue
            self.expect("}")
            return _JVal("object", pairs, start)

    def _array(self, start: SourceSpan, depth: int) -> _JVal:
        self.expect("[")
        items = []
        self.skip_ws()
        if self.peek() == "]":
            self.advance()
            return _JVal("array", items, start)
        while True:
            items.append(self.value(depth + 1))
            self.skip_ws()
            if self.peek() == ",":
                self.advance()
                continue
            self.expect("]")
            return _JVal("array", items, start)

    def _string(self) -> str:
        self.expect('"')
        out = []
        while True:
            if self.pos >= len(self.text):
                self.fail("unterminated string")
            ch = self.advance()
            if ch == '"':
                return "".join(out)
            if ch == "\\":
                if self.pos >= len(self.text):
                    self.fail("unterminated escape")
                esc = self.advance()
                simple = {'"': '"', "\\": "\\", "/": "/", "b": "\b",
                          "f": "\f", "n": "\n", "r": "\r", "t": "\t"}
                if esc in simple:
                    out.append(simple[esc])
                elif esc == "u":
                    if self.pos + 4 > len(self.text):
                        self.fail("truncated unicode escape")
                    hexs = self.text[self.pos:self.pos + 4]
                    try:
                        out.append(chr(int(hexs, 16)))
                    except ValueError:
                        self.fail(f"bad unicode escape \\u{hexs}")
                    for _ in range(4):
                        self.advance()
                else:
                    self.fail(f"bad escape \\{esc}")
            elif ord(ch) < 0x20:
                self.fail("control character in string")
            else:
                out.append(ch)

    def _number(self, start: SourceSpan) -> _JVal:
        begin = self.pos
        if self.peek() == "-":
            self.advance()
        if not self.peek().isdigit():
            self.fail("malformed number")
        while self.peek().isdigit():
            self.advance()
        is_float = False
        if self.peek() == ".":
            is_float = True
            self.advance()
            if not self.peek().isdigit():
                self.fail("malformed number")
            while self.peek().isdigit():
                self.advance()
        if self.peek() in "eE":
            is_float = True
            self.advance()
            if self.peek() in "+-":
                self.advance()
            if not self.peek().isdigit():
                self.fail("malformed number")
            while self.peek().isdigit():
                self.advance()
        text = self.text[begin:self.pos]
        if is_float:
            return _JVal("float", float(text), start)
        return _JVal("int", int(text), start)


def _read(text: str):
    """Parse JSON with spans. Returns (root, dup_errors) or raises _Syntax."""
    sc = _Scanner(text)
    root = sc.value()
    sc.skip_ws()
    if sc.pos != len(text):
        sc.fail("trailing content after document")
    return root, sc.dup_errors


# ---------------------------------------------------------------------------
# schema helpers
# ---------------------------------------------------------------------------

class _Walk:
    def __init__(self, lax: bool):
        self.errors: list = []
        self.lax = lax

    def bad(self, jv: _JVal, message: str, kind: str = "schema-violation"):
        self.errors.append(ParseError(jv.span, kind, message))

    def obj(self, jv: _JVal, what: str, allowed: tuple) -> Optional[dict]:
        if jv.kind != "object":
            self.bad(jv, f"{what} must be an object")
            return None
        out = {}
        for key, key_span, val in jv.value:
            if key not in allowed:
                if not self.lax:
                    self.errors.append(ParseError(
                        key_span, "schema-violation",
                        f"unknown key {key!r} in {what}"))
                continue
            out[key] = val
        return out

    def arr(self, jv: _JVal, what: str) -> Optional[list]:
        if jv.kind != "array":
            self.bad(jv, f"{what} must be an array")
            return None
        return jv.value

    def int_(self, jv: _JVal, what: str, minimum: Optional[int] = None
             ) -> Optional[int]:
        if jv.kind != "int":
            self.bad(jv, f"{what} must be an integer")
            return None
        if minimum is not None and jv.value < minimum:
            self.bad(jv, f"{what} must be >= {minimum}")
            return None
        return jv.value

    def str_(self, jv: _JVal, what: str) -> Optional[str]:
        if jv.kind != "string":
            self.bad(jv, f"{what} must be a string")
            return None
        return jv.value

    def bool_(self, jv: _JVal, what: str) -> Optional[bool]:
        if jv.kind != "bool":
            self.bad(jv, f"{what} must be a boolean")
            return None
        return jv.value


def _endpoint(w: _Walk, jv: _JVal, what: str):
    items = w.arr(jv, what)
    if items is None:
        return None
    if len(items) != 2:
        w.bad(jv, f"{what} must be [node, port]")
        return None
    nid = w.str_(items[0], f"{what} node")
    port = w.int_(items[1], f"{what} port", 0)
    if nid is None or port is None:
        return None
    return (nid, port)


def _parse_ops(w: _Walk, items: list, profile: dict):
    ops = []
    for item in items:
        fields = w.obj(item, "op", ("id", "kind", "args", "latency", "value",
                                    "table"))
        if fields is None:
            continue
        if "id" not in fields or "kind" not in fields:
            w.bad(item, "op needs 'id' and 'kind'")
            continue
        oid = w.str_(fields["id"], "op id")
        kname = w.str_(fields["kind"], "op kind")
        if oid is None or kname is None:
            continue
        if kname not in OpKind.__members__:
            w.bad(fields["kind"], f"unknown op kind {kname!r}",
                  "unknown-reference")
            continue
        kind = OpKind[kname]
        args: tuple = ()
        if "args" in fields:
            raw = w.arr(fields["args"], "op args")
            if raw is None:
                continue
            parts = [w.str_(a, "op arg") for a in raw]
            if any(p is None for p in parts):
                continue
            args = tuple(parts)
        latency = profile[kname]
        if "latency" in fields:
            got = w.int_(fields["latency"], "op latency", 1)
            if got is None:
                continue
            latency = got
        value = 0
        if "value" in fields:
            got = w.int_(fields["value"], "op value")
            if got is None:
                continue
            value = got
        table: tuple = ()
        if "table" in fields:
            raw = w.arr(fields["table"], "op table")
            if raw is None:
                continue
            cells = [w.int_(c, "table cell") for c in raw]
            if any(c is None for c in cells):
                continue
            table = tuple(cells)
        ops.append(OpNode(oid, kind, latency, args, value, table))
    return ops


def _parse_outputs(w: _Walk, jv: _JVal):
    items = w.arr(jv, "outputs")
    if items is None:
        return None
    outs = []
    for item in items:
        if item.kind == "string":
            outs.append((item.value,))
        elif item.kind == "array":
            names = [w.str_(x, "output op id") for x in item.value]
            if any(n is None for n in names):
                return None
            outs.append(tuple(names))
        else:
            w.bad(item, "output port entry must be an op id or a list of op ids")
            return None
    return tuple(outs)


def _rates(w: _Walk, jv: _JVal, what: str):
    items = w.arr(jv, what)
    if items is None:
        return None
    rates = [w.int_(x, f"{what} entry", 1) for x in items]
    if any(r is None for r in rates):
        return None
    return tuple(rates)


def parse_document(text: str, lax: bool = False) -> Document:
    """Parse and validate a graph-description document.

    Collects every independent error; raises DocumentError carrying the full
    list. A syntax error aborts immediately (later structure is untrusted).
    """
    try:
        root, dup_errors = _read(text)
    except _Syntax as exc:
        raise DocumentError([exc.error]) from None
    except RecursionError:  # pragma: no cover - depth guard should prevent
        raise DocumentError([ParseError(SourceSpan(1, 1, 0), "syntax",
                                        "document nested too deeply")]) from None

    w = _Walk(lax)
    w.errors.extend(dup_errors)
    top = w.obj(root, "document", ("profile", "nodes", "channels", "library"))
    if top is None:
        raise DocumentError(w.errors)

    profile = resolve_profile()
    if "profile" in top:
        fields = w.obj(top["profile"], "profile", tuple(OpKind.__members__))
        if fields:
            for kname, jv in fields.items():
                lat = w.int_(jv, f"latency of {kname}", 1)
                if lat is not None:
                    profile[kname] = lat

    nodes = []
    node_spans = {}
    if "nodes" not in top:
        w.bad(root, "document needs a 'nodes' array")
    else:
        items = w.arr(top["nodes"], "nodes") or []
        for item in items:
            fields = w.obj(item, "node", ("id", "in_rates", "out_rates",
                                          "stateless", "ops", "outputs"))
            if fields is None or "id" not in fields:
                w.bad(item, "node needs an 'id'")
                continue
            nid = w.str_(fields["id"], "node id")
            if nid is None:
                continue
            if nid in node_spans:
                w.bad(fields["id"], f"duplicate node id {nid!r}", "duplicate-id")
                continue
            node_spans[nid] = fields["id"].span
            in_rates = _rates(w, fields["in_rates"], "in_rates") \
                if "in_rates" in fields else ()
            out_rates = _rates(w, fields["out_rates"], "out_rates") \
                if "out_rates" in fields else ()
            if in_rates is None or out_rates is None:
                continue
            stateless = True
            if "stateless" in fields:
                got = w.bool_(fields["stateless"], "stateless")
                if got is None:
                    continue
                stateless = got
            op_graph = None
            if "ops" in fields:
                raw = w.arr(fields["ops"], "ops")
                if raw is None:
                    continue
                ops = _parse_ops(w, raw, profile)
                if "outputs" not in fields:
                    w.bad(item, f"node {nid!r} has ops but no 'outputs'")
                    continue
                outputs = _parse_outputs(w, fields["outputs"])
                if outputs is None:
                    continue
                op_graph = OpGraph(tuple(ops), outputs)
            elif "outputs" in fields:
                w.bad(fields["outputs"], f"node {nid!r} has 'outputs' but no ops")
                continue
            nodes.append(CompositeNode(nid, in_rates, out_rates, stateless,
                                       op_graph))

    channels = []
    channel_spans = []
    if "channels" in top:
        items = w.arr(top["channels"], "channels") or []
        for item in items:
            fields = w.obj(item, "channel", ("from", "to"))
            if fields is None or "from" not in fields or "to" not in fields:
                w.bad(item, "channel needs 'from' and 'to'")
                continue
            src = _endpoint(w, fields["from"], "'from'")
            dst = _endpoint(w, fields["to"], "'to'")
            if src is None or dst is None:
                continue
            channels.append(Channel(src, dst))
            channel_spans.append(item.span)

    library = None
    if "library" in top:
        jv = top["library"]
        if jv.kind != "object":
            w.bad(jv, "library must map node ids to entry lists")
        else:
            entries = []
            for nid, key_span, val in jv.value:
                raw = w.arr(val, f"library of {nid!r}")
                if raw is None:
                    continue
                impls = []
                for entry in raw:
                    fields = w.obj(entry, "library entry",
                                   ("version", "area", "ii"))
                    if fields is None:
                        continue
                    if not all(k in fields for k in ("version", "area", "ii")):
                        w.bad(entry, "library entry needs version, area and ii")
                        continue
                    tag = w.str_(fields["version"], "version")
                    area = w.int_(fields["area"], "area", 1)
                    ii = w.int_(fields["ii"], "ii", 1)
                    if tag is None or area is None or ii is None:
                        continue
                    impls.append(Implementation(nid, tag, area, ii, "library"))
                entries.append((nid, tuple(impls)))
                if not any(n.id == nid for n in nodes):
                    w.errors.append(ParseError(
                        key_span, "unknown-reference",
                        f"library entry for unknown node {nid!r}"))
            library = ImplementationLibrary(tuple(entries))

    doc_span = root.span
    app = Application(tuple(nodes), tuple(channels))
    if not w.errors:
        report = validate_application(app)
        kind_map = {"duplicate-id": "duplicate-id",
                    "unknown-reference": "unknown-reference"}
        for v in report.violations:
            span = node_spans.get(v.subject)
            if span is None:
                for ch, sp in zip(channels, channel_spans):
                    if ch.key == v.subject:
                        span = sp
                        break
            w.errors.append(ParseError(
                span or doc_span, kind_map.get(v.code, "schema-violation"),
                v.message))

    if w.errors:
        raise DocumentError(w.errors)
    return Document(app, library, profile)


def parse_document_file(path: str, lax: bool = False) -> Document:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_document(fh.read(), lax=lax)


# ---------------------------------------------------------------------------
# assignment documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureNode:
    id: str
    kind: str       # REPLICA | FORK | JOIN
    of: str = ""    # base node for replicas
    area: int = 0


@dataclass(frozen=True)
class StructureChannel:
    src: tuple     # (id, port)
    dst: tuple     # (id, port)
    mode: str      # rr | bc


@dataclass
class AssignmentDocument:
    """Serializable view of an Assignment plus its expanded structure."""

    selections: list = field(default_factory=list)
    # each: {"node","impl","area","ii","replicas"}
    fusions: list = field(default_factory=list)
    node_area: int = 0
    overhead_area: int = 0
    total_area: int = 0
    achieved_v: Fraction = Fraction(0)
    structure_nodes: list = field(default_factory=list)
    structure_channels: list = field(default_factory=list)

    def to_assignment(self) -> Assignment:
        sels = tuple(
            (s["node"], Selection(
                Implementation(s["node"], s["impl"], s["area"], s["ii"],
                               "library"),
                s["replicas"]))
            for s in self.selections)
        fus = tuple(Fusion(f["producer"], f["consumer"], f["group"])
                    for f in self.fusions)
        return Assignment(sels, fus, self.overhead_area, self.achieved_v)


def serialize_assignment(doc: AssignmentDocument) -> str:
    """Canonical UTF-8 rendering; parsing and re-serializing is byte-identical."""
    obj = {
        "schema": "stgscale-assignment-v1",
        "selections": [
            {"node": s["node"], "impl": s["impl"], "area": s["area"],
             "ii": s["ii"], "replicas": s["replicas"]}
            for s in doc.selections
        ],
        "fusions": [
            {"producer": f["producer"], "consumer": f["consumer"],
             "group": f["group"]}
            for f in doc.fusions
        ],
        "areas": {
            "node_area": doc.node_area,
            "overhead_area": doc.overhead_area,
            "total_area": doc.total_area,
        },
        "achieved_v": [doc.achieved_v.numerator, doc.achieved_v.denominator],
        "structure": {
            "nodes": [
                {"id": n.id, "kind": n.kind, "of": n.of, "area": n.area}
                for n in doc.structure_nodes
            ],
            "channels": [
                {"from": [c.src[0], c.src[1]], "to": [c.dst[0], c.dst[1]],
                 "mode": c.mode}
                for c in doc.structure_channels
            ],
        },
    }
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def parse_assignment(text: str) -> AssignmentDocument:
    """Parse an assignment document; raises DocumentError on any violation."""
    try:
        root, dup_errors = _read(text)
    except _Syntax as exc:
        raise DocumentError([exc.error]) from None

    w = _Walk(lax=False)
    w.errors.extend(dup_errors)
    top = w.obj(root, "assignment", ("schema", "selections", "fusions",
                                     "areas", "achieved_v", "structure"))
    if top is None:
        raise DocumentError(w.errors)
    doc = AssignmentDocument()

    if "schema" in top:
        tag = w.str_(top["schema"], "schema")
        if tag is not None and tag != "stgscale-assignment-v1":
            w.bad(top["schema"], f"unsupported schema {tag!r}")
    else:
        w.bad(root, "assignment needs a 'schema' tag")

    sels = w.arr(top["selections"], "selections") if "selections" in top else None
    if sels is None:
        w.bad(root, "assignment needs 'selections'")
    elif not sels:
        w.bad(top["selections"], "assignment declares no node selections")
    else:
        seen = set()
        for item in sels:
            fields = w.obj(item, "selection",
                           ("node", "impl", "area", "ii", "replicas"))
            if fields is None or not all(
                    k in fields for k in ("node", "impl", "area", "ii",
                                          "replicas")):
                w.bad(item, "selection needs node, impl, area, ii, replicas")
                continue
            nid = w.str_(fields["node"], "node")
            tag = w.str_(fields["impl"], "impl")
            area = w.int_(fields["area"], "area", 1)
            ii = w.int_(fields["ii"], "ii", 1)
            nr = w.int_(fields["replicas"], "replicas", 1)
            if None in (nid, tag, area, ii, nr):
                continue
            if nid in seen:
                w.bad(fields["node"], f"duplicate selection for {nid!r}",
                      "duplicate-id")
                continue
            seen.add(nid)
            doc.selections.append({"node": nid, "impl": tag, "area": area,
                                   "ii": ii, "replicas": nr})

    if "fusions" in top:
        for item in w.arr(top["fusions"], "fusions") or []:
            fields = w.obj(item, "fusion", ("producer", "consumer", "group"))
            if fields is None or not all(
                    k in fields for k in ("producer", "consumer", "group")):
                w.bad(item, "fusion needs producer, consumer, group")
                continue
            p = w.str_(fields["producer"], "producer")
            c = w.str_(fields["consumer"], "consumer")
            g = w.int_(fields["group"], "group", 2)
            if None in (p, c, g):
                continue
            doc.fusions.append({"producer": p, "consumer": c, "group": g})

    if "areas" in top:
        fields = w.obj(top["areas"], "areas",
                       ("node_area", "overhead_area", "total_area"))
        if fields and all(k in fields for k in ("node_area", "overhead_area",
                                                "total_area")):
            na = w.int_(fields["node_area"], "node_area", 0)
            oa = w.int_(fields["overhead_area"], "overhead_area", 0)
            ta = w.int_(fields["total_area"], "total_area", 0)
            if None not in (na, oa, ta):
                doc.node_area, doc.overhead_area, doc.total_area = na, oa, ta
                if ta != na + oa:
                    w.bad(top["areas"],
                          "total_area must equal node_area + overhead_area")
    else:
        w.bad(root, "assignment needs 'areas'")

    if "achieved_v" in top:
        pair = w.arr(top["achieved_v"], "achieved_v")
        if pair is not None and len(pair) == 2:
            num = w.int_(pair[0], "achieved_v numerator", 0)
            den = w.int_(pair[1], "achieved_v denominator", 1)
            if None not in (num, den):
                doc.achieved_v = Fraction(num, den)
        elif pair is not None:
            w.bad(top["achieved_v"], "achieved_v must be [numerator, denominator]")

    if "structure" in top:
        fields = w.obj(top["structure"], "structure", ("nodes", "channels"))
        if fields is not None:
            for item in w.arr(fields.get("nodes", _JVal("array", [], root.span)),
                              "structure nodes") or []:
                nf = w.obj(item, "structure node", ("id", "kind", "of", "area"))
                if nf is None or "id" not in nf or "kind" not in nf:
                    w.bad(item, "structure node needs id and kind")
                    continue
                nid = w.str_(nf["id"], "id")
                kind = w.str_(nf["kind"], "kind")
                if nid is None or kind is None:
                    continue
                if kind not in ("REPLICA", "FORK", "JOIN"):
                    w.bad(nf["kind"], f"unknown structure kind {kind!r}")
                    continue
                if not nid.startswith(GENERATED_PREFIX):
                    w.bad(nf["id"],
                          f"structure node {nid!r} must use the "
                          f"{GENERATED_PREFIX!r} prefix")
                    continue
                of = w.str_(nf["of"], "of") if "of" in nf else ""
                area = w.int_(nf["area"], "area", 0) if "area" in nf else 0
                if of is None or area is None:
                    continue
                doc.structure_nodes.append(StructureNode(nid, kind, of, area))
            for item in w.arr(fields.get("channels",
                                         _JVal("array", [], root.span)),
                              "structure channels") or []:
                cf = w.obj(item, "structure channel", ("from", "to", "mode"))
                if cf is None or "from" not in cf or "to" not in cf:
                    w.bad(item, "structure channel needs 'from' and 'to'")
                    continue
                src = _endpoint(w, cf["from"], "'from'")
                dst = _endpoint(w, cf["to"], "'to'")
                mode = w.str_(cf["mode"], "mode") if "mode" in cf else "bc"
                if src is None or dst is None or mode is None:
                    continue
                if mode not in ("rr", "bc"):
                    w.bad(cf["mode"], f"unknown channel mode {mode!r}")
                    continue
                doc.structure_channels.append(StructureChannel(src, dst, mode))

    if w.errors:
        raise DocumentError(w.errors)
    return doc
