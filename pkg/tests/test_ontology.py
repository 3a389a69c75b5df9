import pathlib

import pytest

from roc_kb.ontology import (
    CATEGORIES,
    COUNTRY,
    COUNTRY_WISE_STATISTICS,
    COUNTRY_WISE_STATISTICS_PROP,
    RESPONSE_STATISTICS,
    STATED_COUNTS,
    STATISTICS_OF_COUNTRY,
    CyclicHierarchy,
    IndicatorDefinition,
    OntologySchema,
    SchemaError,
    load_schema,
    load_schema_file,
    serialize_schema,
    super_properties,
    validate_graph,
)
from roc_kb.terms import RDF_TYPE, ROC, XSD_DECIMAL, XSD_INTEGER, IRI, Literal, Triple
from roc_kb.turtle import parse, serialize

BUNDLED = pathlib.Path(__file__).parent.parent / "src" / "roc_kb" / "data" / "roc-schema.ttl"
H2 = IRI(ROC + "h2_testing_policy")
H6 = IRI(ROC + "h6_facial_coverings")
X = IRI("http://qurator-csi.de/data/covid/SWE-2020-04-01")


def test_indicator_inventory(schema):
    codes = [i.code for i in schema.indicators]
    assert len(codes) == 19
    assert {c[0] for c in codes} == {"c", "e", "h", "m"}
    assert schema.indicator("h6").property_iri == H6
    assert schema.indicator(H2).ordinal_max == 3


def test_every_indicator_has_exactly_its_category_above_it(schema):
    for ind in schema.indicators:
        supers = schema.super_properties(ind.property_iri)
        cats = {code for code, iri in schema.categories.items() if iri in supers}
        assert cats == {ind.category}


def test_category_property_for_health(schema):
    assert schema.category_property("H") == IRI(ROC + CATEGORIES["H"][0])
    assert schema.category_property("H") in super_properties(schema, H2)


def test_monetary_vs_ordinal_ranges(schema):
    assert schema.ranges[IRI(ROC + "h4_emergency_investment_in_healthcare")] == XSD_DECIMAL
    assert schema.ranges[H2] == XSD_INTEGER


def test_class_hierarchy_and_inverse(schema):
    assert COUNTRY_WISE_STATISTICS in schema.super_classes(RESPONSE_STATISTICS)
    assert schema.inverse_pairs()[COUNTRY_WISE_STATISTICS_PROP] == {STATISTICS_OF_COUNTRY}


def test_builtin_counts_next_to_published_totals(schema):
    # published totals include terms never named publicly, so only the enumerable core is built
    assert STATED_COUNTS == {"classes": 27, "object_properties": 10,
                             "data_properties": 42, "annotation_properties": 3}
    assert len(schema.classes) == 4
    assert len(schema.object_properties) == 2
    assert len(schema.data_properties) == 45


def test_schema_round_trips_through_turtle(schema):
    graph = serialize_schema(schema)
    again = load_schema(parse(serialize(graph, "turtle")))
    assert again == schema


def test_bundled_schema_file_is_current(schema):
    assert BUNDLED.read_text(encoding="utf-8") == serialize(serialize_schema(schema), "turtle")
    assert load_schema_file(BUNDLED) == schema


def test_cycle_is_rejected():
    a, b = IRI("http://e/a"), IRI("http://e/b")
    with pytest.raises(CyclicHierarchy):
        OntologySchema(data_properties=frozenset({a, b}), subproperty_of=frozenset({(a, b), (b, a)}))


def test_indicator_invariants():
    with pytest.raises(SchemaError):
        IndicatorDefinition("h2", H2, "H", "Testing policy", "ordinal", None)
    with pytest.raises(SchemaError):
        IndicatorDefinition("h4", H2, "H", "x", "monetary", 3)
    with pytest.raises(SchemaError):
        IndicatorDefinition("zz", H2, "H", "x", "ordinal", 3)


def _typed(*extra):
    return [Triple(X, RDF_TYPE, RESPONSE_STATISTICS), *extra]


@pytest.mark.parametrize("value,ok", [("0", True), ("3", True), ("4", False), ("-1", False)])
def test_ordinal_range(schema, value, ok):
    report = validate_graph(_typed(Triple(X, H2, Literal(value, XSD_INTEGER))), schema)
    assert report.conforms is ok
    if not ok:
        assert report.violations[0].rule_id == "ordinal-range"


def test_non_numeric_value(schema):
    report = validate_graph(_typed(Triple(X, H2, Literal("high"))), schema)
    assert [v.rule_id for v in report.violations] == ["non-numeric"]


def test_untyped_statistics(schema):
    report = validate_graph([Triple(X, H6, Literal("1", XSD_INTEGER))], schema)
    assert [v.rule_id for v in report.violations] == ["untyped-statistics"]


def test_dangling_country_link(schema):
    country = IRI("http://qurator-csi.de/data/covid/country/SWE")
    report = validate_graph([Triple(country, COUNTRY_WISE_STATISTICS_PROP, X),
                             Triple(country, RDF_TYPE, COUNTRY)], schema)
    assert [v.rule_id for v in report.violations] == ["dangling-link"]
    assert "dangling-link" in report.to_text()


def test_fixture_kb_conforms(fixture_store, schema):
    assert validate_graph(fixture_store.triples(), schema).conforms
