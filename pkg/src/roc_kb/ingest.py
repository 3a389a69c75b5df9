"""CSV → RDF transformation driven by declarative JSON mapping documents.

A mapping document looks like::

    {
      "subject_template": "http://qurator-csi.de/data/covid/{CountryCode}-{Date}",
      "types": ["roc:ResponseStatistics"],
      "null_markers": ["", "NA"],
      "bindings": [
        {"column": "Date", "property": "roc:date", "datatype": "xsd:date",
         "transform": "date_yyyymmdd_to_iso"}
      ],
      "links": [
        {"property": "codo:countryWiseStatistics",
         "node_template": "http://qurator-csi.de/data/covid/country/{CountryCode}",
         "direction": "incoming", "types": ["roc:Country"], "label_column": "CountryName"}
      ]
    }

Template placeholders take the cell value after the transform of the binding on
the same column (so ``{Date}`` yields ``2020-04-01``), percent-encoded for IRIs.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union
from urllib.parse import quote

from .terms import (
    CODO,
    DATA,
    OWL,
    RDF,
    RDF_TYPE,
    RDFS,
    ROC,
    XSD,
    IRI,
    Graph,
    Literal,
    TermError,
    Triple,
)

RDFS_LABEL = IRI(RDFS + "label")
DEFAULT_NULL_MARKERS = ("", "NA")
PRESETS = ("oxcgrt", "ecdc", "ilo")
DEFAULT_PREFIXES = {"rdf": RDF, "rdfs": RDFS, "owl": OWL, "xsd": XSD, "roc": ROC, "codo": CODO}


class IngestError(ValueError):
    pass


class EmptyInput(IngestError):
    pass


class RaggedRow(IngestError):
    def __init__(self, row_number: int, expected: int, found: int):
        super().__init__(f"row {row_number}: expected {expected} cells, found {found}")
        self.row_number = row_number


class MappingError(IngestError):
    pass


class UnknownColumn(MappingError):
    pass


class DuplicateBinding(MappingError):
    pass


class BadTemplate(MappingError):
    pass


class UnknownTransform(MappingError):
    pass


class MissingTemplateColumn(IngestError):
    pass


@dataclass
class Table:
    header: list
    rows: list
    source_id: str = ""

    def __post_init__(self):
        width = len(self.header)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise RaggedRow(i + 2, width, len(row))

    def __len__(self):
        return len(self.rows)

    def records(self):
        for row in self.rows:
            yield dict(zip(self.header, row))


def parse_csv(data: Union[bytes, str], delimiter: str = ",", quote: str = '"', source_id: str = "") -> Table:
    """RFC 4180-style CSV with a header row; row numbers count the header as row 1."""
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    elif data.startswith("﻿"):
        data = data[1:]
    if not data.strip():
        raise EmptyInput("CSV input is empty")
    reader = csv.reader(io.StringIO(data, newline=""), delimiter=delimiter, quotechar=quote, strict=True)
    try:
        header = next(reader)
        rows = []
        for number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(number, len(header), len(row))
            rows.append(row)
    except csv.Error as exc:
        raise IngestError(f"CSV syntax error near line {reader.line_num}: {exc}") from None
    return Table(header, rows, source_id)


def read_csv(path, delimiter: str = ",") -> Table:
    with open(path, "rb") as fh:
        return parse_csv(fh.read(), delimiter=delimiter, source_id=str(path))


# transforms

def _date_yyyymmdd_to_iso(value: str) -> str:
    value = value.strip()
    if not re.fullmatch(r"[0-9]{8}", value):
        raise ValueError(f"expected a YYYYMMDD date, got {value!r}")
    return f"{value[:4]}-{value[4:6]}-{value[6:]}"


def _date_dmy_to_iso(value: str) -> str:
    m = re.fullmatch(r"([0-9]{1,2})/([0-9]{1,2})/([0-9]{4})", value.strip())
    if not m:
        raise ValueError(f"expected a DD/MM/YYYY date, got {value!r}")
    day, month, year = m.groups()
    return f"{year}-{int(month):02d}-{int(day):02d}"


def _integral(value: str) -> str:
    # OxCGRT exports ordinal codes as "2.00"
    m = re.fullmatch(r"([+-]?[0-9]+)(?:\.0*)?", value.strip())
    if not m:
        raise ValueError(f"expected an integral number, got {value!r}")
    return str(int(m.group(1)))


TRANSFORMS = {
    "none": lambda v: v,
    "trim": str.strip,
    "date_yyyymmdd_to_iso": _date_yyyymmdd_to_iso,
    "date_dmy_to_iso": _date_dmy_to_iso,
    "integral": _integral,
}


# mapping model

_PLACEHOLDER = re.compile(r"\{([^{}]*)\}")


def template_columns(template: str) -> list:
    depth = 0
    for ch in template:
        if ch == "{":
            depth += 1
            if depth > 1:
                raise BadTemplate(f"nested brace in template {template!r}")
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise BadTemplate(f"unbalanced '}}' in template {template!r}")
    if depth:
        raise BadTemplate(f"unbalanced '{{' in template {template!r}")
    cols = _PLACEHOLDER.findall(template)
    if any(c == "" for c in cols):
        raise BadTemplate(f"empty placeholder in template {template!r}")
    return cols


@dataclass(frozen=True)
class Binding:
    column: str
    property: IRI
    datatype: IRI
    null_markers: tuple = DEFAULT_NULL_MARKERS
    transform: str = "none"


@dataclass(frozen=True)
class Link:
    property: IRI
    node_template: str
    direction: str = "incoming"  # incoming: node → subject; outgoing: subject → node
    types: tuple = ()
    label_column: Optional[str] = None


@dataclass(frozen=True)
class MappingSpec:
    subject_template: str
    type_assertions: tuple = ()
    bindings: tuple = ()
    links: tuple = ()
    name: str = "custom"

    def columns(self) -> set:
        cols = set(template_columns(self.subject_template))
        cols.update(b.column for b in self.bindings)
        for link in self.links:
            cols.update(template_columns(link.node_template))
            if link.label_column:
                cols.add(link.label_column)
        return cols

    def template_columns(self) -> set:
        cols = set(template_columns(self.subject_template))
        for link in self.links:
            cols.update(template_columns(link.node_template))
        return cols


def _expand(name: str, prefixes: dict, what: str) -> IRI:
    if not isinstance(name, str):
        raise MappingError(f"{what} must be a string, got {name!r}")
    if name.startswith("<") and name.endswith(">"):
        name = name[1:-1]
    prefix, sep, local = name.partition(":")
    if sep and prefix in prefixes:
        name = prefixes[prefix] + local
    try:
        return IRI(name)
    except TermError:
        raise MappingError(f"{what} {name!r} is neither a known prefixed name nor an absolute IRI") from None


def compile_mapping(document: Union[str, dict], header: Optional[list] = None) -> MappingSpec:
    """Validate a mapping document (JSON text or parsed dict).

    When ``header`` is given every referenced column must exist in it.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MappingError(f"mapping is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise MappingError("mapping document must be a JSON object")
    prefixes = dict(DEFAULT_PREFIXES)
    prefixes.update(document.get("prefixes", {}))
    template = document.get("subject_template")
    if not isinstance(template, str):
        raise MappingError("mapping needs a 'subject_template' string")
    template_columns(template)
    default_nulls = tuple(document.get("null_markers", DEFAULT_NULL_MARKERS))

    bindings = []
    seen = set()
    for i, raw in enumerate(document.get("bindings", [])):
        try:
            column = raw["column"]
            prop = _expand(raw["property"], prefixes, "property")
        except KeyError as exc:
            raise MappingError(f"binding #{i} lacks {exc.args[0]!r}") from None
        if column in seen:
            raise DuplicateBinding(f"column {column!r} is bound more than once")
        seen.add(column)
        transform = raw.get("transform", "none")
        if transform not in TRANSFORMS:
            raise UnknownTransform(f"unknown transform {transform!r} on column {column!r}")
        datatype = _expand(raw.get("datatype", "xsd:string"), prefixes, "datatype")
        nulls = tuple(raw.get("null_markers", default_nulls))
        bindings.append(Binding(column, prop, datatype, nulls, transform))

    links = []
    for raw in document.get("links", []):
        node_template = raw.get("node_template")
        if not isinstance(node_template, str):
            raise MappingError("link needs a 'node_template' string")
        template_columns(node_template)
        direction = raw.get("direction", "incoming")
        if direction not in ("incoming", "outgoing"):
            raise MappingError(f"link direction must be 'incoming' or 'outgoing', got {direction!r}")
        links.append(Link(
            _expand(raw.get("property"), prefixes, "link property"),
            node_template,
            direction,
            tuple(_expand(t, prefixes, "type") for t in raw.get("types", [])),
            raw.get("label_column"),
        ))

    spec = MappingSpec(
        subject_template=template,
        type_assertions=tuple(_expand(t, prefixes, "type") for t in document.get("types", [])),
        bindings=tuple(bindings),
        links=tuple(links),
        name=document.get("name", "custom"),
    )
    if header is not None:
        missing = sorted(spec.columns() - set(header))
        if missing:
            raise UnknownColumn(f"mapping references columns not in the header: {missing}")
    return spec


def preset_document(source: str) -> str:
    if source not in PRESETS:
        raise MappingError(f"unknown preset {source!r}; expected one of {PRESETS}")
    return resources.files("roc_kb").joinpath("data").joinpath("mappings").joinpath(f"{source}.json").read_text("utf-8")


def preset_mapping(source: str) -> MappingSpec:
    return compile_mapping(preset_document(source))


# application

@dataclass
class IngestReport:
    rows_read: int = 0
    triples_emitted: int = 0
    instances_created: int = 0
    skipped_cells: int = 0
    errors: list = field(default_factory=list)  # (row number, message)

    def summary(self) -> str:
        return (
            f"rows={self.rows_read} triples={self.triples_emitted} "
            f"instances={self.instances_created} skipped_cells={self.skipped_cells} "
            f"errors={len(self.errors)}"
        )


def _fill(template: str, cells: dict) -> str:
    return _PLACEHOLDER.sub(lambda m: quote(cells[m.group(1)], safe="-._~"), template)


def apply_mapping(table: Table, spec: MappingSpec):
    """Transform a table into (Graph, IngestReport).

    Binding columns absent from the table are ignored; a template column
    absent from the header fails the whole table.
    """
    header = set(table.header)
    missing = sorted(spec.template_columns() - header)
    if missing:
        raise MissingTemplateColumn(f"template columns missing from {table.source_id or 'table'}: {missing}")

    graph = Graph(prefixes={"rdf": RDF, "rdfs": RDFS, "xsd": XSD, "roc": ROC, "codo": CODO, "data": DATA})
    add = graph._triples.add
    report = IngestReport()
    by_column = {b.column: b for b in spec.bindings}
    active = [b for b in spec.bindings if b.column in header]
    placeholder_cols = spec.template_columns()
    subjects = set()

    for number, record in enumerate(table.records(), start=2):
        report.rows_read += 1
        keys = {}
        try:
            for col in placeholder_cols:
                raw = record[col]
                binding = by_column.get(col)
                nulls = binding.null_markers if binding else DEFAULT_NULL_MARKERS
                if raw in nulls:
                    raise ValueError(f"template column {col!r} is empty")
                keys[col] = TRANSFORMS[binding.transform](raw) if binding else raw.strip()
            subject = IRI(_fill(spec.subject_template, keys))
        except (ValueError, TermError) as exc:
            report.errors.append((number, str(exc)))
            continue
        subjects.add(subject)
        for cls in spec.type_assertions:
            add(Triple(subject, RDF_TYPE, cls))
        for b in active:
            raw = record[b.column]
            if raw in b.null_markers:
                report.skipped_cells += 1
                continue
            try:
                lexical = TRANSFORMS[b.transform](raw)
                add(Triple(subject, b.property, Literal(lexical, b.datatype)))
            except (ValueError, TermError) as exc:
                report.errors.append((number, f"column {b.column!r}: {exc}"))
        for link in spec.links:
            node = IRI(_fill(link.node_template, keys))
            if link.direction == "incoming":
                add(Triple(node, link.property, subject))
            else:
                add(Triple(subject, link.property, node))
            for cls in link.types:
                add(Triple(node, RDF_TYPE, cls))
            if link.label_column and link.label_column in record:
                label = record[link.label_column].strip()
                if label not in DEFAULT_NULL_MARKERS:
                    add(Triple(node, RDFS_LABEL, Literal(label)))

    report.instances_created = len(subjects)
    report.triples_emitted = len(graph)
    return graph, report
