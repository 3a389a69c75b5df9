"""The ROC schema: classes, property hierarchy, OxCGRT indicator taxonomy.

The builtin schema covers the enumerable core of ROC v1.0: the 19 OxCGRT
indicators (C1-C8, E1-E4, H1-H6, M1), their flag properties, one category
super-property per C/E/H/M group, the four composite indices, ECDC case
statistics and two ILO labour-market properties. Classes and properties that
ROC v1.0 contains but never names publicly are not invented here, so the
totals differ from :data:`STATED_COUNTS`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .terms import (
    CODO,
    OWL,
    RDF,
    RDF_TYPE,
    RDFS,
    ROC,
    XSD,
    XSD_BOOLEAN,
    XSD_DATE,
    XSD_DECIMAL,
    XSD_INTEGER,
    XSD_STRING,
    IRI,
    Graph,
    Literal,
    NUMERIC_DATATYPES,
    Triple,
    numeric_value,
)

# Published size of ROC v1.0, kept for reference only.
STATED_COUNTS = {
    "classes": 27,
    "object_properties": 10,
    "data_properties": 42,
    "annotation_properties": 3,
}

OWL_CLASS = IRI(OWL + "Class")
OWL_OBJECT_PROPERTY = IRI(OWL + "ObjectProperty")
OWL_DATATYPE_PROPERTY = IRI(OWL + "DatatypeProperty")
OWL_ANNOTATION_PROPERTY = IRI(OWL + "AnnotationProperty")
OWL_ONTOLOGY = IRI(OWL + "Ontology")
OWL_INVERSE_OF = IRI(OWL + "inverseOf")
RDFS_CLASS = IRI(RDFS + "Class")
RDFS_SUBCLASS_OF = IRI(RDFS + "subClassOf")
RDFS_SUBPROPERTY_OF = IRI(RDFS + "subPropertyOf")
RDFS_DOMAIN = IRI(RDFS + "domain")
RDFS_RANGE = IRI(RDFS + "range")
RDFS_LABEL = IRI(RDFS + "label")

RESPONSE_STATISTICS = IRI(ROC + "ResponseStatistics")
COUNTRY_WISE_STATISTICS = IRI(CODO + "CountryWiseStatistics")
COUNTRY = IRI(ROC + "Country")
LABOUR_MARKET_STATISTICS = IRI(ROC + "LabourMarketStatistics")
COUNTRY_WISE_STATISTICS_PROP = IRI(CODO + "countryWiseStatistics")
STATISTICS_OF_COUNTRY = IRI(ROC + "statistics_of_country")
DATE = IRI(ROC + "date")
PERIOD = IRI(ROC + "period")
NEW_CASES = IRI(ROC + "new_cases")
NEW_DEATHS = IRI(ROC + "new_deaths")
POPULATION = IRI(ROC + "population")

# annotation vocabulary used to carry indicator metadata in the Turtle form
INDICATOR_CODE = IRI(ROC + "indicatorCode")
VALUE_KIND = IRI(ROC + "valueKind")
ORDINAL_MAX = IRI(ROC + "ordinalMax")
FLAG_PROPERTY = IRI(ROC + "flagProperty")
CATEGORY_CODE = IRI(ROC + "categoryCode")

ONTOLOGY_IRI = IRI("http://qurator-csi.de/ontologies/covid/responses")

CATEGORIES = {
    "C": ("containment_and_closure", "Containment and closure policies"),
    "E": ("economic_response", "Economic policies"),
    "H": ("health_systems", "Health system policies"),
    "M": ("miscellaneous", "Miscellaneous policies"),
}

VALUE_KINDS = ("ordinal", "monetary", "count", "text")

# OxCGRT codebook (v2.x, 2020 release): code, column label, kind, ordinal max, flag.
OXCGRT_CODEBOOK = (
    ("c1", "School closing", "ordinal", 3, True),
    ("c2", "Workplace closing", "ordinal", 3, True),
    ("c3", "Cancel public events", "ordinal", 2, True),
    ("c4", "Restrictions on gatherings", "ordinal", 4, True),
    ("c5", "Close public transport", "ordinal", 2, True),
    ("c6", "Stay at home requirements", "ordinal", 3, True),
    ("c7", "Restrictions on internal movement", "ordinal", 2, True),
    ("c8", "International travel controls", "ordinal", 4, False),
    ("e1", "Income support", "ordinal", 2, True),
    ("e2", "Debt/contract relief", "ordinal", 2, False),
    ("e3", "Fiscal measures", "monetary", None, False),
    ("e4", "International support", "monetary", None, False),
    ("h1", "Public information campaigns", "ordinal", 2, True),
    ("h2", "Testing policy", "ordinal", 3, False),
    ("h3", "Contact tracing", "ordinal", 2, False),
    ("h4", "Emergency investment in healthcare", "monetary", None, False),
    ("h5", "Investment in vaccines", "monetary", None, False),
    ("h6", "Facial Coverings", "ordinal", 4, True),
    ("m1", "Wildcard", "text", None, False),
)

COMPOSITE_INDICES = (
    ("stringency_index", "Stringency index"),
    ("government_response_index", "Government response index"),
    ("containment_health_index", "Containment and health index"),
    ("economic_support_index", "Economic support index"),
)


class SchemaError(ValueError):
    pass


class CyclicHierarchy(SchemaError):
    pass


class UnknownProperty(SchemaError, KeyError):
    def __str__(self):
        return f"unknown property: {self.args[0]}"


def snake_case(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", label.lower()).strip("_")


@dataclass(frozen=True)
class IndicatorDefinition:
    code: str
    property_iri: IRI
    category: str
    label: str
    value_kind: str
    ordinal_max: Optional[int] = None
    has_flag: bool = False

    def __post_init__(self):
        if not re.fullmatch(r"[cehm][0-9]+", self.code):
            raise SchemaError(f"bad indicator code {self.code!r}")
        if self.category not in CATEGORIES:
            raise SchemaError(f"bad category {self.category!r} for {self.code}")
        if self.value_kind not in VALUE_KINDS:
            raise SchemaError(f"bad value kind {self.value_kind!r} for {self.code}")
        if self.value_kind == "ordinal":
            if self.ordinal_max is None or self.ordinal_max < 1:
                raise SchemaError(f"ordinal indicator {self.code} needs ordinal_max >= 1")
        elif self.ordinal_max is not None:
            raise SchemaError(f"{self.value_kind} indicator {self.code} cannot have ordinal_max")

    @property
    def flag_iri(self) -> Optional[IRI]:
        return IRI(f"{ROC}{self.code}_flag") if self.has_flag else None

    @property
    def column(self) -> str:
        """Column header used by OxCGRT exports, e.g. ``H2_Testing policy``."""
        return f"{self.code.upper()}_{self.label}"


@dataclass(frozen=True)
class OntologySchema:
    classes: frozenset = frozenset()
    subclass_of: frozenset = frozenset()
    object_properties: frozenset = frozenset()
    data_properties: frozenset = frozenset()
    subproperty_of: frozenset = frozenset()
    inverse_of: frozenset = frozenset()
    domains: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)
    indicators: tuple = ()
    categories: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_acyclic(self.subclass_of, "subclass")
        _check_acyclic(self.subproperty_of, "subproperty")
        for ind in self.indicators:
            if ind.property_iri not in self.data_properties:
                raise SchemaError(f"indicator {ind.code} is not a data property")
            ancestors = [c for c, p in self.categories.items()
                         if p in self.super_properties(ind.property_iri)]
            if ancestors != [ind.category]:
                raise SchemaError(
                    f"indicator {ind.code} must have exactly the category {ind.category} "
                    f"as ancestor, found {ancestors}"
                )

    @property
    def properties(self) -> frozenset:
        return self.object_properties | self.data_properties

    def super_properties(self, prop: IRI) -> set:
        return _closure_above(prop, self.subproperty_of)

    def super_classes(self, cls: IRI) -> set:
        return _closure_above(cls, self.subclass_of)

    def indicator(self, key) -> IndicatorDefinition:
        """Look up an indicator by code (``"h6"``) or property IRI."""
        for ind in self.indicators:
            if ind.code == key or ind.property_iri == key:
                return ind
        raise KeyError(key)

    def category_property(self, category: str) -> IRI:
        return self.categories[category]

    def inverse_pairs(self) -> dict:
        """Property → set of inverse properties, symmetric."""
        table: dict = {}
        for p, q in self.inverse_of:
            table.setdefault(p, set()).add(q)
            table.setdefault(q, set()).add(p)
        return table


def _closure_above(node, edges) -> set:
    up: dict = {}
    for a, b in edges:
        up.setdefault(a, []).append(b)
    seen: set = set()
    stack = list(up.get(node, ()))
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(up.get(n, ()))
    seen.discard(node)
    return seen


def _check_acyclic(edges, what: str):
    up: dict = {}
    for a, b in edges:
        up.setdefault(a, []).append(b)
    state: dict = {}
    for start in sorted(up, key=lambda t: t.sort_key):
        if state.get(start):
            continue
        stack = [(start, iter(up.get(start, ())))]
        state[start] = 1
        while stack:
            node, children = stack[-1]
            child = next(children, None)
            if child is None:
                state[node] = 2
                stack.pop()
            elif state.get(child) == 1:
                raise CyclicHierarchy(f"{what} cycle through <{child.value}>")
            elif not state.get(child):
                state[child] = 1
                stack.append((child, iter(up.get(child, ()))))


def super_properties(schema: OntologySchema, prop: IRI) -> set:
    if prop not in schema.properties:
        raise UnknownProperty(prop.value if isinstance(prop, IRI) else prop)
    return schema.super_properties(prop)


def builtin_roc_schema() -> OntologySchema:
    classes = {RESPONSE_STATISTICS, COUNTRY_WISE_STATISTICS, COUNTRY, LABOUR_MARKET_STATISTICS}
    subclass_of = {
        (RESPONSE_STATISTICS, COUNTRY_WISE_STATISTICS),
        (LABOUR_MARKET_STATISTICS, COUNTRY_WISE_STATISTICS),
    }
    labels = {
        RESPONSE_STATISTICS: "Response statistics",
        COUNTRY_WISE_STATISTICS: "Country-wise statistics",
        COUNTRY: "Country",
        LABOUR_MARKET_STATISTICS: "Labour market statistics",
        COUNTRY_WISE_STATISTICS_PROP: "country-wise statistics",
        STATISTICS_OF_COUNTRY: "statistics of country",
    }
    data_properties = set()
    subproperty_of = set()
    ranges = {}
    categories = {}
    for code, (local, label) in CATEGORIES.items():
        iri = IRI(ROC + local)
        categories[code] = iri
        data_properties.add(iri)
        labels[iri] = label

    indicators = []
    for code, label, kind, ordinal_max, has_flag in OXCGRT_CODEBOOK:
        iri = IRI(f"{ROC}{code}_{snake_case(label)}")
        ind = IndicatorDefinition(code, iri, code[0].upper(), label, kind, ordinal_max, has_flag)
        indicators.append(ind)
        data_properties.add(iri)
        subproperty_of.add((iri, categories[ind.category]))
        ranges[iri] = {"ordinal": XSD_INTEGER, "monetary": XSD_DECIMAL,
                       "count": XSD_INTEGER, "text": XSD_STRING}[kind]
        labels[iri] = ind.column
        if has_flag:
            data_properties.add(ind.flag_iri)
            ranges[ind.flag_iri] = XSD_BOOLEAN
            labels[ind.flag_iri] = f"{code.upper()}_Flag"

    extra = [(IRI(ROC + local), label, XSD_DECIMAL) for local, label in COMPOSITE_INDICES]
    extra += [
        (DATE, "date", XSD_DATE),
        (PERIOD, "reporting period", XSD_STRING),
        (NEW_CASES, "new cases", XSD_INTEGER),
        (NEW_DEATHS, "new deaths", XSD_INTEGER),
        (POPULATION, "population", XSD_INTEGER),
        (IRI(ROC + "cases_14d_per_100k"), "14-day case notification rate per 100 000", XSD_DECIMAL),
        (IRI(ROC + "unemployment_rate"), "unemployment rate", XSD_DECIMAL),
        (IRI(ROC + "labour_force_participation_rate"), "labour force participation rate", XSD_DECIMAL),
    ]
    for iri, label, datatype in extra:
        data_properties.add(iri)
        ranges[iri] = datatype
        labels[iri] = label

    return OntologySchema(
        classes=frozenset(classes),
        subclass_of=frozenset(subclass_of),
        object_properties=frozenset({COUNTRY_WISE_STATISTICS_PROP, STATISTICS_OF_COUNTRY}),
        data_properties=frozenset(data_properties),
        subproperty_of=frozenset(subproperty_of),
        inverse_of=frozenset({(COUNTRY_WISE_STATISTICS_PROP, STATISTICS_OF_COUNTRY)}),
        domains={COUNTRY_WISE_STATISTICS_PROP: COUNTRY,
                 STATISTICS_OF_COUNTRY: COUNTRY_WISE_STATISTICS},
        ranges=ranges,
        indicators=tuple(indicators),
        categories=categories,
        labels=labels,
    )


def serialize_schema(schema: OntologySchema) -> Graph:
    g = Graph(prefixes={"rdf": RDF, "rdfs": RDFS, "owl": OWL, "xsd": XSD, "roc": ROC, "codo": CODO})
    add = g.add
    if schema.indicators or schema.categories:
        add(Triple(ONTOLOGY_IRI, RDF_TYPE, OWL_ONTOLOGY))
        for ap in (INDICATOR_CODE, VALUE_KIND, ORDINAL_MAX, FLAG_PROPERTY, CATEGORY_CODE):
            add(Triple(ap, RDF_TYPE, OWL_ANNOTATION_PROPERTY))
    for c in schema.classes:
        add(Triple(c, RDF_TYPE, OWL_CLASS))
    for a, b in schema.subclass_of:
        add(Triple(a, RDFS_SUBCLASS_OF, b))
    for p in schema.object_properties:
        add(Triple(p, RDF_TYPE, OWL_OBJECT_PROPERTY))
    for p in schema.data_properties:
        add(Triple(p, RDF_TYPE, OWL_DATATYPE_PROPERTY))
    for a, b in schema.subproperty_of:
        add(Triple(a, RDFS_SUBPROPERTY_OF, b))
    for a, b in schema.inverse_of:
        add(Triple(a, OWL_INVERSE_OF, b))
    for p, c in schema.domains.items():
        add(Triple(p, RDFS_DOMAIN, c))
    for p, dt in schema.ranges.items():
        add(Triple(p, RDFS_RANGE, dt))
    for term, label in schema.labels.items():
        add(Triple(term, RDFS_LABEL, Literal(label)))
    for code, p in schema.categories.items():
        add(Triple(p, CATEGORY_CODE, Literal(code)))
    for ind in schema.indicators:
        p = ind.property_iri
        add(Triple(p, INDICATOR_CODE, Literal(ind.code)))
        add(Triple(p, VALUE_KIND, Literal(ind.value_kind)))
        if ind.ordinal_max is not None:
            add(Triple(p, ORDINAL_MAX, Literal(str(ind.ordinal_max), XSD_INTEGER)))
        if ind.has_flag:
            add(Triple(p, FLAG_PROPERTY, ind.flag_iri))
    return g


def load_schema(graph: Iterable[Triple]) -> OntologySchema:
    """Read a schema back from its RDFS/OWL triples."""
    classes, obj_props, data_props = set(), set(), set()
    subclass_of, subproperty_of, inverse_of = set(), set(), set()
    domains, ranges, labels, categories = {}, {}, {}, {}
    ind_meta: dict = {}

    def single(table, key, value, what):
        if table.get(key, value) != value:
            raise SchemaError(f"<{key.value}> has more than one {what}")
        table[key] = value

    for s, p, o in graph:
        if p == RDF_TYPE:
            if o in (OWL_CLASS, RDFS_CLASS):
                classes.add(s)
            elif o == OWL_OBJECT_PROPERTY:
                obj_props.add(s)
            elif o == OWL_DATATYPE_PROPERTY:
                data_props.add(s)
        elif p == RDFS_SUBCLASS_OF:
            subclass_of.add((s, o))
        elif p == RDFS_SUBPROPERTY_OF:
            subproperty_of.add((s, o))
        elif p == OWL_INVERSE_OF:
            inverse_of.add((s, o))
        elif p == RDFS_DOMAIN:
            single(domains, s, o, "domain")
        elif p == RDFS_RANGE:
            single(ranges, s, o, "range")
        elif p == RDFS_LABEL:
            single(labels, s, o.lexical, "label")
        elif p == CATEGORY_CODE:
            single(categories, o.lexical, s, "category property")
        elif p in (INDICATOR_CODE, VALUE_KIND, ORDINAL_MAX, FLAG_PROPERTY):
            ind_meta.setdefault(s, {})[p] = o

    _check_acyclic(subclass_of, "subclass")
    _check_acyclic(subproperty_of, "subproperty")

    category_of = {iri: code for code, iri in categories.items()}
    indicators = []
    for prop, meta in ind_meta.items():
        if INDICATOR_CODE not in meta:
            raise SchemaError(f"<{prop.value}> has indicator metadata but no code")
        above = _closure_above(prop, subproperty_of)
        cats = sorted(category_of[q] for q in above if q in category_of)
        if len(cats) != 1:
            raise SchemaError(f"indicator <{prop.value}> needs exactly one category ancestor, found {cats}")
        code = meta[INDICATOR_CODE].lexical
        label = labels.get(prop, "")
        prefix = f"{code.upper()}_"
        indicators.append(IndicatorDefinition(
            code=code,
            property_iri=prop,
            category=cats[0],
            label=label[len(prefix):] if label.startswith(prefix) else label,
            value_kind=meta[VALUE_KIND].lexical if VALUE_KIND in meta else "ordinal",
            ordinal_max=int(meta[ORDINAL_MAX].lexical) if ORDINAL_MAX in meta else None,
            has_flag=FLAG_PROPERTY in meta,
        ))
    indicators.sort(key=_indicator_order)

    return OntologySchema(
        classes=frozenset(classes),
        subclass_of=frozenset(subclass_of),
        object_properties=frozenset(obj_props),
        data_properties=frozenset(data_props),
        subproperty_of=frozenset(subproperty_of),
        inverse_of=frozenset(inverse_of),
        domains=domains,
        ranges=ranges,
        indicators=tuple(indicators),
        categories=categories,
        labels=labels,
    )


def _indicator_order(ind: IndicatorDefinition):
    return ("cehm".index(ind.code[0]), int(ind.code[1:]))


def load_schema_file(path) -> OntologySchema:
    from .turtle import parse_file

    return load_schema(parse_file(path))


# validation

@dataclass(frozen=True)
class Violation:
    triple: Triple
    rule_id: str
    message: str

    @property
    def subject(self):
        return self.triple[0]


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def conforms(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def rows(self) -> list:
        return [(v.rule_id, v.subject.n3(), v.message) for v in self.violations]

    def to_text(self) -> str:
        if self.conforms:
            return "graph conforms (0 violations)\n"
        lines = [f"{rule}\t{subject}\t{message}" for rule, subject, message in self.rows()]
        return "\n".join(lines) + f"\n{len(lines)} violation(s)\n"


def validate_graph(graph: Iterable[Triple], schema: OntologySchema) -> ValidationReport:
    """Check indicator ranges, numeric typing, statistics typing and country links.

    Rule ids: ``ordinal-range``, ``non-numeric``, ``untyped-statistics``,
    ``dangling-link``. Types are evaluated after subclass and domain entailment.
    """
    triples = list(graph)
    ordinal_max = {i.property_iri: i.ordinal_max for i in schema.indicators if i.value_kind == "ordinal"}
    indicator_props = {i.property_iri for i in schema.indicators}
    numeric_props = {p for p, dt in schema.ranges.items() if dt in NUMERIC_DATATYPES}

    types: dict = {}
    has_outgoing = set()
    domain_of = {}
    for p, c in schema.domains.items():
        domain_of[p] = {c}
    for p in schema.properties:
        for q in schema.super_properties(p):
            if q in schema.domains:
                domain_of.setdefault(p, set()).add(schema.domains[q])
    for s, p, o in triples:
        has_outgoing.add(s)
        if p == RDF_TYPE:
            types.setdefault(s, set()).add(o)
        for c in domain_of.get(p, ()):
            types.setdefault(s, set()).add(c)
    closed: dict = {}

    def type_closure(s):
        if s not in closed:
            found = set(types.get(s, ()))
            for c in list(found):
                found |= schema.super_classes(c)
            closed[s] = found
        return closed[s]

    violations = []
    for t in triples:
        s, p, o = t
        if p in numeric_props:
            if o.__class__ is not Literal or not o.is_numeric:
                violations.append(Violation(t, "non-numeric", "non-numeric value on numeric property"))
            elif p in ordinal_max:
                value = numeric_value(o)
                if value != value or value < 0 or value > ordinal_max[p]:
                    violations.append(Violation(
                        t, "ordinal-range",
                        f"ordinal out of range: {o.lexical} not in [0, {ordinal_max[p]}]",
                    ))
        if p in indicator_props and RESPONSE_STATISTICS not in type_closure(s):
            violations.append(Violation(t, "untyped-statistics", "indicator subject is not a roc:ResponseStatistics"))
        if p == COUNTRY_WISE_STATISTICS_PROP and (o.__class__ is Literal or o not in has_outgoing):
            violations.append(Violation(t, "dangling-link", "codo:countryWiseStatistics object has no data"))
    violations.sort(key=lambda v: (v.rule_id, v.triple.sort_key))
    return ValidationReport(violations)
