"""RDF terms, triples and graphs.

Terms are immutable and hash-cached; they are compared structurally (a
literal is equal to another literal only when lexical form, datatype and
language tag all match). Value semantics for numbers and dates live in
:func:`numeric_value` and :func:`date_value`, used by FILTER and aggregates.
"""

from __future__ import annotations

import datetime as _dt
import math
import re
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Union

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"
ROC = "http://qurator-csi.de/ontologies/covid/responses#"
CODO = "http://www.isibang.ac.in/ns/codo#"
DATA = "http://qurator-csi.de/data/covid/"


class TermError(ValueError):
    pass


class MalformedIri(TermError):
    def __init__(self, text):
        super().__init__(f"malformed IRI: {text!r}")
        self.text = text


class DatatypeMismatch(TermError):
    def __init__(self, lexical, datatype):
        super().__init__(f"{lexical!r} is not a valid lexical form for <{datatype}>")
        self.lexical = lexical
        self.datatype = datatype


class LangConflict(TermError):
    pass


class NotNumeric(TermError):
    pass


_IRI_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*:")
# whitespace, control characters and angle brackets
_IRI_FORBIDDEN = re.compile(r"[\x00-\x20<>]")
_BNODE_LABEL = re.compile(r"[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?\Z")
_LANG_TAG = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*\Z")


class IRI:
    __slots__ = ("value", "_hash")

    def __init__(self, value: str):
        if (
            not isinstance(value, str)
            or not _IRI_SCHEME.match(value)
            or _IRI_FORBIDDEN.search(value)
        ):
            raise MalformedIri(value)
        self.value = value
        self._hash = hash(("I", value))

    def __eq__(self, other):
        return self is other or (other.__class__ is IRI and other.value == self.value)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"IRI({self.value!r})"

    def __str__(self):
        return self.value

    def n3(self) -> str:
        return f"<{self.value}>"

    @property
    def sort_key(self):
        return (1, self.value, "", "")


class BlankNode:
    __slots__ = ("label", "_hash")

    def __init__(self, label: str):
        if not isinstance(label, str) or not _BNODE_LABEL.match(label):
            raise TermError(f"invalid blank node label: {label!r}")
        self.label = label
        self._hash = hash(("B", label))

    def __eq__(self, other):
        return self is other or (
            other.__class__ is BlankNode and other.label == self.label
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"BlankNode({self.label!r})"

    def n3(self) -> str:
        return f"_:{self.label}"

    @property
    def sort_key(self):
        return (0, self.label, "", "")


def make_iri(text: str) -> IRI:
    return IRI(text)


XSD_STRING = IRI(XSD + "string")
XSD_BOOLEAN = IRI(XSD + "boolean")
XSD_INTEGER = IRI(XSD + "integer")
XSD_DECIMAL = IRI(XSD + "decimal")
XSD_DOUBLE = IRI(XSD + "double")
XSD_DATE = IRI(XSD + "date")
RDF_LANGSTRING = IRI(RDF + "langString")
RDF_TYPE = IRI(RDF + "type")

NUMERIC_DATATYPES = frozenset({XSD_INTEGER, XSD_DECIMAL, XSD_DOUBLE})

_GRAMMARS = {
    XSD_INTEGER: re.compile(r"[+-]?[0-9]+\Z"),
    XSD_DECIMAL: re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)\Z"),
    XSD_DOUBLE: re.compile(
        r"(?:[+-]?(?:(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?|INF)|NaN)\Z"
    ),
    XSD_BOOLEAN: re.compile(r"(?:true|false|1|0)\Z"),
    XSD_DATE: re.compile(r"-?[0-9]{4,}-[0-9]{2}-[0-9]{2}(?:Z|[+-][0-9]{2}:[0-9]{2})?\Z"),
}


def _valid_date(lexical: str) -> bool:
    m = re.match(r"(-?[0-9]{4,})-([0-9]{2})-([0-9]{2})", lexical)
    year, month, day = int(m.group(1)), int(m.group(2)), int(m.group(3))
    if not 1 <= month <= 12:
        return False
    # same leap-year behaviour, in a range datetime can represent
    try:
        _dt.date(2000 + year % 400, month, day)
    except ValueError:
        return False
    return True


class Literal:
    __slots__ = ("lexical", "datatype", "lang", "_hash", "_num")

    def __init__(self, lexical: str, datatype: Optional[IRI] = None, lang: Optional[str] = None):
        if not isinstance(lexical, str):
            raise TermError(f"literal lexical form must be str, got {type(lexical).__name__}")
        if datatype is None:
            datatype = XSD_STRING if lang is None else RDF_LANGSTRING
        if lang is not None:
            if datatype != RDF_LANGSTRING:
                raise LangConflict(f"language tag {lang!r} given with datatype <{datatype.value}>")
            if not _LANG_TAG.match(lang):
                raise TermError(f"invalid language tag: {lang!r}")
        elif datatype == RDF_LANGSTRING:
            raise LangConflict("rdf:langString literal requires a language tag")
        grammar = _GRAMMARS.get(datatype)
        if grammar is not None:
            if not grammar.match(lexical):
                raise DatatypeMismatch(lexical, datatype.value)
            if datatype == XSD_DATE and not _valid_date(lexical):
                raise DatatypeMismatch(lexical, datatype.value)
        self.lexical = lexical
        self.datatype = datatype
        self.lang = lang
        self._hash = hash((lexical, datatype.value, lang))
        self._num = None

    def __eq__(self, other):
        return self is other or (
            other.__class__ is Literal
            and other.lexical == self.lexical
            and other.datatype == self.datatype
            and other.lang == self.lang
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.lang:
            return f"Literal({self.lexical!r}, lang={self.lang!r})"
        if self.datatype == XSD_STRING:
            return f"Literal({self.lexical!r})"
        return f"Literal({self.lexical!r}, {self.datatype.value.rsplit('#', 1)[-1]})"

    def n3(self) -> str:
        text = '"' + escape_string(self.lexical) + '"'
        if self.lang is not None:
            return f"{text}@{self.lang}"
        if self.datatype == XSD_STRING:
            return text
        return f"{text}^^<{self.datatype.value}>"

    @property
    def sort_key(self):
        return (2, self.datatype.value, self.lexical, self.lang or "")

    @property
    def is_numeric(self) -> bool:
        return self.datatype in NUMERIC_DATATYPES


def make_literal(lexical: str, datatype: Optional[IRI] = None, lang: Optional[str] = None) -> Literal:
    return Literal(lexical, datatype, lang)


Term = Union[IRI, BlankNode, Literal]


def compare_terms(a: Term, b: Term) -> int:
    """Total order: blank nodes < IRIs < literals, then lexicographic."""
    ka, kb = a.sort_key, b.sort_key
    return (ka > kb) - (ka < kb)


def numeric_value(lit: Literal) -> Union[int, Fraction, float]:
    """Number denoted by an integer, decimal or double literal.

    Integers and decimals are exact (``int`` / ``Fraction``); doubles are floats.
    """
    if lit.__class__ is not Literal or lit.datatype not in NUMERIC_DATATYPES:
        raise NotNumeric(f"{lit!r} is not a numeric literal")
    if lit._num is None:
        if lit.datatype == XSD_INTEGER:
            lit._num = int(lit.lexical)
        elif lit.datatype == XSD_DECIMAL:
            value = Fraction(lit.lexical)
            lit._num = value.numerator if value.denominator == 1 else value
        else:
            lit._num = float(lit.lexical)
    return lit._num


def date_value(lit: Literal) -> _dt.date:
    """Calendar date of an xsd:date literal (timezone suffix ignored)."""
    if lit.__class__ is not Literal or lit.datatype != XSD_DATE:
        raise TermError(f"{lit!r} is not an xsd:date literal")
    return _dt.date.fromisoformat(lit.lexical[:10])


def format_decimal(value, places: int = 12) -> str:
    """Canonical-ish xsd:decimal lexical form for an exact number.

    Non-terminating fractions are rounded half-even to ``places`` digits.
    """
    value = Fraction(value)
    sign = "-" if value < 0 else ""
    value = abs(value)
    scaled = round(value * 10**places)
    whole, frac = divmod(scaled, 10**places)
    frac_text = str(frac).rjust(places, "0").rstrip("0") or "0"
    if whole == 0 and frac_text == "0":
        sign = ""
    return f"{sign}{whole}.{frac_text}"


def format_double(value: float) -> str:
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "INF" if value > 0 else "-INF"
    mantissa, _, exponent = f"{value:.15E}".partition("E")
    mantissa = mantissa.rstrip("0")
    if mantissa.endswith("."):
        mantissa += "0"
    return f"{mantissa}E{int(exponent)}"


def number_literal(value) -> Literal:
    """Literal for a Python number: int → integer, Fraction → decimal, float → double."""
    if isinstance(value, bool):
        raise TermError("booleans are not numbers here")
    if isinstance(value, int):
        return Literal(str(value), XSD_INTEGER)
    if isinstance(value, Fraction):
        return Literal(format_decimal(value), XSD_DECIMAL)
    return Literal(format_double(float(value)), XSD_DOUBLE)


_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_NEEDS_ESCAPE = re.compile(r'["\\\x00-\x1f\x7f]')


def _escape_char(m):
    ch = m.group(0)
    return _ESCAPES.get(ch) or f"\\u{ord(ch):04X}"


def escape_string(text: str) -> str:
    return _NEEDS_ESCAPE.sub(_escape_char, text)


class Triple(tuple):
    """Immutable (subject, predicate, object) statement."""

    __slots__ = ()

    def __new__(cls, subject, predicate, object):
        if predicate.__class__ is not IRI:
            raise TermError(f"predicate must be an IRI, got {predicate!r}")
        if subject.__class__ is Literal or subject.__class__ not in (IRI, BlankNode):
            raise TermError(f"subject must be an IRI or blank node, got {subject!r}")
        if object.__class__ not in (IRI, BlankNode, Literal):
            raise TermError(f"object must be an RDF term, got {object!r}")
        return tuple.__new__(cls, (subject, predicate, object))

    @property
    def subject(self):
        return self[0]

    @property
    def predicate(self):
        return self[1]

    @property
    def object(self):
        return self[2]

    @property
    def sort_key(self):
        return (self[0].sort_key, self[1].sort_key, self[2].sort_key)

    def n3(self) -> str:
        return f"{self[0].n3()} {self[1].n3()} {self[2].n3()} ."

    def __repr__(self):
        return f"Triple({self[0]!r}, {self[1]!r}, {self[2]!r})"


class Graph:
    """A set of triples plus a prefix table."""

    def __init__(self, triples: Iterable[Triple] = (), prefixes: Optional[dict] = None):
        self._triples: set = set()
        self.prefixes: dict[str, str] = {}
        for name, ns in (prefixes or {}).items():
            self.bind(name, ns)
        for t in triples:
            self.add(t)

    def bind(self, name: str, namespace: str) -> None:
        IRI(namespace)  # prefixes must map to absolute IRIs
        self.prefixes[name] = namespace

    def add(self, triple: Triple) -> bool:
        if not isinstance(triple, Triple):
            triple = Triple(*triple)
        before = len(self._triples)
        self._triples.add(triple)
        return len(self._triples) != before

    def __len__(self):
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple):
        return triple in self._triples

    def __eq__(self, other):
        return isinstance(other, Graph) and self._triples == other._triples

    def __repr__(self):
        return f"<Graph {len(self)} triples>"

    def sorted(self) -> list:
        return sorted(self._triples, key=lambda t: t.sort_key)

    def blank_nodes(self) -> set:
        return {
            term
            for t in self._triples
            for term in (t[0], t[2])
            if term.__class__ is BlankNode
        }

    def merge(self, other: "Graph") -> "Graph":
        """Union with ``other``; colliding blank-node labels in ``other`` are renamed."""
        ours = {b.label for b in self.blank_nodes()}
        rename = {}
        counter = 0
        for b in sorted(other.blank_nodes(), key=lambda b: b.label):
            if b.label in ours:
                while True:
                    candidate = f"{b.label}_{counter}"
                    counter += 1
                    if candidate not in ours:
                        break
                ours.add(candidate)
                rename[b] = BlankNode(candidate)
        merged = Graph(self._triples, self.prefixes)
        for name, ns in other.prefixes.items():
            merged.prefixes.setdefault(name, ns)
        for s, p, o in other:
            merged.add(Triple(rename.get(s, s), p, rename.get(o, o)))
        return merged

    def isomorphic(self, other: "Graph") -> bool:
        return isomorphic(self, other)


def isomorphic(g1: Iterable[Triple], g2: Iterable[Triple]) -> bool:
    """Graph isomorphism up to blank-node renaming.

    Ground triples must match exactly; blank nodes are partitioned by an
    iterated neighbourhood signature and the remaining ambiguity is resolved by
    backtracking.
    """
    t1, t2 = set(g1), set(g2)
    if t1 == t2:
        return True
    if len(t1) != len(t2):
        return False
    ground1 = {t for t in t1 if t[0].__class__ is not BlankNode and t[2].__class__ is not BlankNode}
    ground2 = {t for t in t2 if t[0].__class__ is not BlankNode and t[2].__class__ is not BlankNode}
    if ground1 != ground2:
        return False
    rest1, rest2 = list(t1 - ground1), list(t2 - ground2)
    if not rest1:
        return True
    colors1 = _refine_colors(rest1)
    colors2 = _refine_colors(rest2)
    if sorted(colors1.values()) != sorted(colors2.values()):
        return False
    target = set(rest2)
    by_color: dict = {}
    for b, c in colors2.items():
        by_color.setdefault(c, []).append(b)
    order = sorted(colors1, key=lambda b: (len(by_color[colors1[b]]), colors1[b]))

    def consistent(mapping):
        for s, p, o in rest1:
            ms = mapping.get(s, s) if s.__class__ is BlankNode else s
            mo = mapping.get(o, o) if o.__class__ is BlankNode else o
            if (s.__class__ is BlankNode and s not in mapping) or (
                o.__class__ is BlankNode and o not in mapping
            ):
                continue
            if (ms, p, mo) not in target:
                return False
        return True

    def search(i, mapping, used):
        if i == len(order):
            return True
        b = order[i]
        for cand in by_color[colors1[b]]:
            if cand in used:
                continue
            mapping[b] = cand
            used.add(cand)
            if consistent(mapping) and search(i + 1, mapping, used):
                return True
            del mapping[b]
            used.discard(cand)
        return False

    return search(0, {}, set())


def _refine_colors(triples, rounds: int = 4) -> dict:
    colors = {}
    for s, _, o in triples:
        for term in (s, o):
            if term.__class__ is BlankNode:
                colors[term] = 0
    for _ in range(rounds):
        sig: dict = {b: [] for b in colors}
        for s, p, o in triples:
            so = ("b", colors[o]) if o.__class__ is BlankNode else o.sort_key
            ss = ("b", colors[s]) if s.__class__ is BlankNode else s.sort_key
            if s.__class__ is BlankNode:
                sig[s].append(("out", p.value, so))
            if o.__class__ is BlankNode:
                sig[o].append(("in", p.value, ss))
        keys = {b: (colors[b], tuple(sorted(map(repr, v)))) for b, v in sig.items()}
        palette = {k: i for i, k in enumerate(sorted(set(keys.values()), key=repr))}
        colors = {b: palette[k] for b, k in keys.items()}
    return colors
