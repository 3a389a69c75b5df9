"""SPARQL 1.1 result serialization (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json

from ..terms import XSD_STRING, BlankNode, IRI
from .evaluator import SolutionTable

FORMATS = {
    "sparql-json": "application/sparql-results+json",
    "csv": "text/csv",
}


def _json_term(term) -> dict:
    if term.__class__ is IRI:
        return {"type": "uri", "value": term.value}
    if term.__class__ is BlankNode:
        return {"type": "bnode", "value": term.label}
    out = {"type": "literal", "value": term.lexical}
    if term.lang is not None:
        out["xml:lang"] = term.lang
    elif term.datatype != XSD_STRING:
        out["datatype"] = term.datatype.value
    return out


def to_json(table: SolutionTable) -> dict:
    return {
        "head": {"vars": list(table.variables)},
        "results": {
            "bindings": [
                {v: _json_term(row[v]) for v in table.variables if v in row}
                for row in table.rows
            ]
        },
    }


def _csv_value(term) -> str:
    if term is None:
        return ""
    if term.__class__ is IRI:
        return term.value
    if term.__class__ is BlankNode:
        return "_:" + term.label
    return term.lexical


def to_csv(table: SolutionTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(table.variables)
    for row in table.rows:
        writer.writerow([_csv_value(row.get(v)) for v in table.variables])
    return buf.getvalue()


def serialize_results(table: SolutionTable, fmt: str = "sparql-json") -> bytes:
    if fmt in ("sparql-json", "json"):
        return (json.dumps(to_json(table), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "csv":
        return to_csv(table).encode("utf-8")
    raise ValueError(f"unknown result format {fmt!r}; expected one of {sorted(FORMATS)}")
