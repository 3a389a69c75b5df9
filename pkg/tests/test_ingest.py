import json

import pytest

from roc_kb.fixtures import BUNDLED, fixture_path
from roc_kb.ingest import (
    BadTemplate,
    DuplicateBinding,
    EmptyInput,
    MissingTemplateColumn,
    RaggedRow,
    UnknownColumn,
    UnknownTransform,
    apply_mapping,
    compile_mapping,
    parse_csv,
    preset_mapping,
    read_csv,
)
from roc_kb.ontology import RESPONSE_STATISTICS, builtin_roc_schema
from roc_kb.terms import RDF_TYPE, ROC, XSD_INTEGER, IRI, Literal, Triple
from roc_kb.turtle import serialize_ntriples

SWE = IRI("http://qurator-csi.de/data/covid/SWE-2020-04-01")
SWE_NODE = IRI("http://qurator-csi.de/data/covid/country/SWE")


class TestCsv:
    def test_simple(self):
        t = parse_csv(b"a,b\n1,2\n")
        assert t.header == ["a", "b"] and t.rows == [["1", "2"]]

    def test_quoted_delimiter_newline_and_quote(self):
        t = parse_csv(b'a,b\n"x,y","line\nbreak ""q"""\n')
        assert t.rows == [["x,y", 'line\nbreak "q"']]

    def test_ragged_row_number_counts_header(self):
        with pytest.raises(RaggedRow) as info:
            parse_csv(b"a,b\n1\n")
        assert info.value.row_number == 2

    def test_empty(self):
        with pytest.raises(EmptyInput):
            parse_csv(b"")

    def test_bom_and_crlf(self):
        t = parse_csv("﻿a;b\r\n1;2\r\n".encode(), delimiter=";")
        assert t.header == ["a", "b"] and t.rows == [["1", "2"]]

    def test_header_only(self):
        assert len(parse_csv(b"a,b\n")) == 0


class TestCompile:
    def test_oxcgrt_preset_has_19_indicator_bindings(self):
        spec = preset_mapping("oxcgrt")
        indicators = {i.property_iri for i in builtin_roc_schema().indicators}
        assert sum(1 for b in spec.bindings if b.property in indicators) == 19
        assert spec.subject_template == "http://qurator-csi.de/data/covid/{CountryCode}-{Date}"

    def test_ecdc_and_ilo_presets(self):
        assert {"cases", "deaths"} <= {b.column for b in preset_mapping("ecdc").bindings}
        assert "unemployment_rate" in {b.column for b in preset_mapping("ilo").bindings}

    @pytest.mark.parametrize("template", ["{CountryCode", "x}", "{a{b}}", "{}"])
    def test_bad_template(self, template):
        with pytest.raises(BadTemplate):
            compile_mapping({"subject_template": template})

    def test_duplicate_binding(self):
        doc = {"subject_template": "http://e/{a}", "bindings": [
            {"column": "H2_Testing policy", "property": "roc:h2_testing_policy"},
            {"column": "H2_Testing policy", "property": "roc:h3_contact_tracing"},
        ]}
        with pytest.raises(DuplicateBinding):
            compile_mapping(doc)

    def test_unknown_transform(self):
        doc = {"subject_template": "http://e/{a}",
               "bindings": [{"column": "a", "property": "roc:x", "transform": "uppercase"}]}
        with pytest.raises(UnknownTransform):
            compile_mapping(json.dumps(doc))

    def test_unknown_column_against_header(self):
        with pytest.raises(UnknownColumn):
            compile_mapping({"subject_template": "http://e/{zz}"}, header=["a"])


class TestApply:
    def test_single_row_golden(self):
        table = parse_csv(b"CountryCode,Date,H6_Facial Coverings\nSWE,20200401,0\n")
        graph, report = apply_mapping(table, preset_mapping("oxcgrt"))
        expected = {
            Triple(SWE, RDF_TYPE, RESPONSE_STATISTICS),
            Triple(SWE, IRI(ROC + "date"), Literal("2020-04-01", IRI("http://www.w3.org/2001/XMLSchema#date"))),
            Triple(SWE, IRI(ROC + "h6_facial_coverings"), Literal("0", XSD_INTEGER)),
            Triple(SWE_NODE, IRI("http://www.isibang.ac.in/ns/codo#countryWiseStatistics"), SWE),
            Triple(SWE_NODE, RDF_TYPE, IRI(ROC + "Country")),
        }
        assert set(graph) == expected
        assert (report.rows_read, report.instances_created, report.triples_emitted) == (1, 1, 5)

    def test_empty_table(self):
        graph, report = apply_mapping(parse_csv(b"CountryCode,Date\n"), preset_mapping("oxcgrt"))
        assert len(graph) == 0 and report.rows_read == 0

    def test_nulls_are_skipped_and_counted(self):
        table = parse_csv(b"CountryCode,Date,H2_Testing policy,H3_Contact tracing\nSWE,20200401,NA,\n")
        graph, report = apply_mapping(table, preset_mapping("oxcgrt"))
        assert report.skipped_cells == 2
        assert not any(t[1].value.endswith(("h2_testing_policy", "h3_contact_tracing")) for t in graph)

    def test_bad_cells_become_row_errors(self):
        table = parse_csv(b"CountryCode,Date,H2_Testing policy\nSWE,2020-04-01,1\nSWE,20200402,high\n")
        graph, report = apply_mapping(table, preset_mapping("oxcgrt"))
        assert [row for row, _ in report.errors] == [2, 3]
        assert report.instances_created == 1

    def test_missing_template_column_fails_the_table(self):
        with pytest.raises(MissingTemplateColumn):
            apply_mapping(parse_csv(b"Date\n20200401\n"), preset_mapping("oxcgrt"))

    def test_placeholders_are_percent_encoded(self):
        spec = compile_mapping({"subject_template": "http://e/{name}", "types": ["roc:Country"]})
        graph, _ = apply_mapping(parse_csv(b"name\nSt Kitts/Nevis\n"), spec)
        assert {t[0] for t in graph} == {IRI("http://e/St%20Kitts%2FNevis")}

    def test_deterministic_and_idempotent(self):
        table = read_csv(fixture_path("oxcgrt_3x10.csv"))
        g1, _ = apply_mapping(table, preset_mapping("oxcgrt"))
        g2, _ = apply_mapping(table, preset_mapping("oxcgrt"))
        assert serialize_ntriples(g1) == serialize_ntriples(g2)
        merged = g1.merge(g2)
        assert len(merged) == len(g1)

    def test_grid_reconciles(self):
        table = read_csv(fixture_path("oxcgrt_3x10.csv"))
        spec = preset_mapping("oxcgrt")
        _, report = apply_mapping(table, spec)
        active = [b for b in spec.bindings if b.column in table.header]
        grid = len(table) * len(active)
        emitted_values = grid - report.skipped_cells
        countries = len({r[table.header.index("CountryCode")] for r in table.rows})
        # type + link per row, type + label per country
        assert report.triples_emitted == emitted_values + 2 * len(table) + 2 * countries

    def test_ecdc_dates_land_on_the_oxcgrt_nodes(self):
        ox, _ = apply_mapping(read_csv(fixture_path("oxcgrt_3x30.csv")), preset_mapping("oxcgrt"))
        ec, _ = apply_mapping(read_csv(fixture_path("ecdc_3x30.csv")), preset_mapping("ecdc"))
        assert {t[0] for t in ox if t[1] == RDF_TYPE and t[2] == RESPONSE_STATISTICS} == \
            {t[0] for t in ec if t[1].value.endswith("new_cases")}

    def test_ilo_uses_period_nodes(self):
        graph, report = apply_mapping(read_csv(fixture_path("ilo_3.csv")), preset_mapping("ilo"))
        assert report.instances_created == 6
        assert IRI("http://qurator-csi.de/data/covid/SWE-2020Q2") in {t[0] for t in graph}


def test_bundled_fixtures_match_the_generator():
    for name, make in BUNDLED.items():
        assert fixture_path(name).read_text(encoding="utf-8") == make(), name
