"""Canonical benchmark documents and their ground-truth expectations.

Fixtures are schema-conformant documents shipped as package data; the
expectations table (``expectations.json``) is consumed by the acceptance
suite, every entry tagged with its provenance ("reported" values come from
the published benchmark tables, "derived" values from independent oracles,
"constructed" values are calibration choices of this repository).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from stgscale.errors import StructuralError
from stgscale.frontend import Document, parse_document
from stgscale.model import ImplementationLibrary


@dataclass
class Fixture:
    id: str
    text: str
    document: Document
    expectations: dict

    @property
    def app(self):
        return self.document.app

    @property
    def library(self) -> Optional[ImplementationLibrary]:
        return self.document.library


_FILES = ("jpeg", "nbody", "chain3", "diamond", "rates3")


def _data_text(name: str) -> str:
    return (resources.files("stgscale.fixtures") / "data" / name).read_text(
        encoding="utf-8")


def _make_chain(n: int) -> str:
    nodes = [{"id": "n0", "in_rates": [], "out_rates": [1],
              "stateless": False}]
    channels = []
    library = {"n0": [{"version": "v1", "area": 1, "ii": 1}]}
    for i in range(1, n):
        nodes.append({"id": f"n{i}", "in_rates": [1], "out_rates": [1]})
        channels.append({"from": [f"n{i-1}", 0], "to": [f"n{i}", 0]})
        library[f"n{i}"] = [{"version": "v1", "area": 1, "ii": 1}]
    return json.dumps({"nodes": nodes, "channels": channels,
                       "library": library}, indent=2) + "\n"


def fixture_ids() -> tuple:
    return _FILES


def load_fixture(fixture_id: str) -> Fixture:
    """Load a fixture by id. ``chainN`` (N >= 2) chains are generated."""
    m = re.fullmatch(r"chain(\d+)", fixture_id)
    if fixture_id in _FILES:
        text = _data_text(f"{fixture_id}.json")
    elif m and int(m.group(1)) >= 2:
        text = _make_chain(int(m.group(1)))
    else:
        raise StructuralError(f"unknown fixture {fixture_id!r}")
    document = parse_document(text)
    expectations = json.loads(_data_text("expectations.json")).get(
        fixture_id, {})
    return Fixture(fixture_id, text, document, expectations)
