"""``roc-kb`` command line: ingest → materialize → validate → query / serve / cq."""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import os
import pathlib
import sys

from . import __version__
from .cq import (
    CQError,
    country_iri,
    cq1_countries_with_response,
    cq1_query,
    cq2_incidence_at_adoption,
    cq3_run_lengths,
    cq4_adoption_report,
    cq5_lagged_correlation,
    extract_series,
    growth_rate,
    resolve_indicator,
    series_query,
)
from .ingest import IngestError, compile_mapping, apply_mapping, preset_document, read_csv
from .ontology import (
    COUNTRY_WISE_STATISTICS,
    SchemaError,
    builtin_roc_schema,
    load_schema_file,
    validate_graph,
)
from .sparql import QueryError, evaluate, serialize_results
from .store import Store
from .terms import RDF_TYPE, IRI, TermError
from .turtle import TurtleSyntaxError, serialize_ntriples

log = logging.getLogger("roc_kb")


class Failure(Exception):
    """Domain failure: reported on stderr, exit status 1."""


# helpers

def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write(path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _schema(args):
    path = getattr(args, "schema", None) or os.environ.get("ROC_SCHEMA")
    if path:
        return load_schema_file(path), str(path)
    return builtin_roc_schema(), "builtin"


def _load_kb(paths) -> Store:
    store = Store.load(*paths)
    log.info("loaded %d triples from %s", len(store), ", ".join(map(str, paths)))
    return store


def _manifest(args, inputs, extra: dict):
    target = args.manifest
    if target is True:
        out = getattr(args, "out", None)
        if not out:
            raise Failure("--manifest needs a path when the command has no --out")
        target = str(out) + ".manifest.json"
    doc = {
        "tool": "roc-kb",
        "version": __version__,
        "command": args.command,
        "timestamp": dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat(),
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
    }
    doc.update(extra)
    out = getattr(args, "out", None)
    if out and pathlib.Path(out).exists():
        doc["output"] = {"path": str(out), "sha256": _sha256(out)}
    _write(target, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    log.info("wrote manifest %s", target)


def _emit(header, rows, fmt, stream):
    if fmt == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    cells = [[str(h) for h in header]] + [["" if c is None else str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for n, r in enumerate(cells):
        stream.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")
        if n == 0:
            stream.write("  ".join("-" * w for w in widths) + "\n")


def _fmt_num(v):
    if v is None:
        return None
    if isinstance(v, float):
        return f"{v:.6g}" if not v.is_integer() else str(int(v))
    return str(v)


def _short(iri) -> str:
    value = iri.value if isinstance(iri, IRI) else str(iri)
    return value.rsplit("/", 1)[-1]


# subcommands

def cmd_ingest(args, out):
    if args.source == "custom":
        if not args.mapping:
            raise Failure("--source custom requires --mapping")
        document = pathlib.Path(args.mapping).read_text(encoding="utf-8")
    else:
        document = pathlib.Path(args.mapping).read_text(encoding="utf-8") if args.mapping else preset_document(args.source)
    table = read_csv(args.csv, delimiter=args.delimiter)
    spec = compile_mapping(document)
    graph, report = apply_mapping(table, spec)
    for row, message in report.errors:
        log.warning("%s row %d: %s", args.csv, row, message)
    _write(args.out, serialize_ntriples(graph))
    log.info("%s", report.summary())
    if args.manifest:
        inputs = [args.csv] + ([args.mapping] if args.mapping else [])
        _manifest(args, inputs, {
            "mapping": args.mapping or f"preset:{args.source}",
            "counts": {"asserted": len(graph), "inferred": 0},
            "ingest": {"rows_read": report.rows_read, "instances_created": report.instances_created,
                       "skipped_cells": report.skipped_cells, "errors": len(report.errors)},
        })
    return 0


def cmd_materialize(args, out):
    schema, schema_name = _schema(args)
    store = _load_kb(args.kb)
    added = store.materialize(schema)
    _write(args.out, store.dump(annotate=args.annotate))
    stats = store.stats()
    log.info("materialized: %d asserted, %d inferred", stats.asserted, stats.inferred)
    if args.manifest:
        inputs = list(args.kb) + ([schema_name] if schema_name != "builtin" else [])
        _manifest(args, inputs, {"schema": schema_name,
                                 "counts": {"asserted": stats.asserted, "inferred": added}})
    return 0


def cmd_validate(args, out):
    schema, schema_name = _schema(args)
    store = _load_kb(args.kb)
    report = validate_graph(store.triples(), schema)
    if report.violations:
        out.write(report.to_text().rstrip("\n") + "\n")
    elif not args.quiet:
        out.write("conforms\n")
    if args.manifest:
        _manifest(args, list(args.kb), {"schema": schema_name, "violations": len(report.violations)})
    return 1 if report.violations else 0


def cmd_query(args, out):
    if args.query_text is not None:
        text = args.query_text
    else:
        text = pathlib.Path(args.query).read_text(encoding="utf-8")
    store = _load_kb(args.kb)
    table = evaluate(text, store)
    fmt = "sparql-json" if args.format == "json" else args.format
    data = serialize_results(table, fmt)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        out.write(data.decode("utf-8"))
        out.flush()
    log.info("%d result rows", len(table))
    if args.manifest:
        inputs = list(args.kb) + ([args.query] if args.query else [])
        _manifest(args, inputs, {"rows": len(table)})
    return 0


def cmd_serve(args, out):
    from .endpoint import EndpointConfig, serve

    host, port = EndpointConfig.parse_bind(args.bind)
    config = EndpointConfig(host=host, port=port, max_query_bytes=args.max_query_bytes,
                            request_timeout=args.timeout_ms / 1000.0)
    store = _load_kb(args.kb)
    if not args.quiet:
        sys.stderr.write(f"serving {len(store)} triples on http://{host}:{port}/sparql\n")
    serve(store, config)
    return 0


def cmd_stats(args, out):
    store = _load_kb(args.kb)
    schema, _ = _schema(args)
    stat_classes = {COUNTRY_WISE_STATISTICS} | {c for c, sup in schema.subclass_of
                                                 if COUNTRY_WISE_STATISTICS in schema.super_classes(c)}
    instances = {t[0] for c in stat_classes for t in store.triples(None, RDF_TYPE, c)}
    s = store.stats()
    rows = [
        ("triples", len(store)),
        ("subjects", s.subjects),
        ("predicates", s.predicates),
        ("instances", len(instances)),
    ]
    _emit(["measure", "value"], rows, args.format, out)
    return 0


def cmd_cq(args, out):
    store = _load_kb(args.kb)
    schema, _ = _schema(args)
    prop = resolve_indicator(args.indicator, schema)
    q = args.question
    if q == 1:
        if args.show_query:
            out.write(cq1_query(prop, args.level) + "\n")
        countries = sorted(cq1_countries_with_response(store, prop, args.level, schema), key=lambda c: c.value)
        _emit(["country"], [[_short(c)] for c in countries], args.format, out)
        return 0 if countries else 1

    countries = [country_iri(c) for c in args.country] if args.country else None
    if q == 4:
        rows = cq4_adoption_report(store, prop, args.level, countries,
                                   outcome=_outcome(args), schema=schema)
        if args.show_query:
            out.write(cq1_query(prop, 0) + "\n")
        _emit(["country", "adoption", "incidence", "peak_after", "peak_date"],
              [[_short(r.country), r.adoption, _fmt_num(r.incidence), _fmt_num(r.peak_after), r.peak_date]
               for r in rows], args.format, out)
        return 0
    if not countries:
        raise Failure(f"cq {q} requires at least one --country")
    if args.show_query:
        out.write(series_query(countries[0], prop) + "\n")
    rows = []
    for country in countries:
        series = extract_series(store, country, prop)
        if q == 2:
            cases = extract_series(store, country, _outcome(args))
            found = cq2_incidence_at_adoption(series, cases, args.level, args.population)
            rows.append([_short(country), found[0] if found else None, _fmt_num(found[1]) if found else None])
        elif q == 3:
            for ep in cq3_run_lengths(series, args.level):
                rows.append([_short(country), ep.start, ep.end, ep.days])
        else:
            outcome = extract_series(store, country, _outcome(args))
            if args.mode == "growth":
                outcome = growth_rate(outcome)
            for c in cq5_lagged_correlation(series, outcome, args.max_lag):
                rows.append([_short(country), c.lag, None if c.r is None else f"{c.r:.6f}", c.overlap,
                             "*" if c.best else ""])
    header = {
        2: ["country", "adoption", "incidence"],
        3: ["country", "start", "end", "days"],
        5: ["country", "lag", "r", "overlap", "best"],
    }[q]
    _emit(header, rows, args.format, out)
    return 0


def _outcome(args) -> IRI:
    from .ingest import DEFAULT_PREFIXES

    name = args.outcome
    prefix, sep, local = name.partition(":")
    if sep and prefix in DEFAULT_PREFIXES:
        return IRI(DEFAULT_PREFIXES[prefix] + local)
    return IRI(name)


# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress progress lines")
    common.add_argument("--manifest", nargs="?", const=True, metavar="PATH",
                        help="write a run manifest (default: OUT.manifest.json)")

    parser = argparse.ArgumentParser(prog="roc-kb", description=__doc__)
    parser.add_argument("--version", action="version", version=f"roc-kb {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="CSV → N-Triples via a mapping")
    p.add_argument("--source", required=True, choices=["oxcgrt", "ecdc", "ilo", "custom"])
    p.add_argument("--csv", required=True)
    p.add_argument("--mapping", help="mapping JSON (required for custom, overrides presets)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("materialize", parents=[common], help="apply schema entailment")
    p.add_argument("--kb", required=True, nargs="+")
    p.add_argument("--schema", help="schema Turtle file (default: $ROC_SCHEMA or bundled)")
    p.add_argument("--out", required=True)
    p.add_argument("--annotate", action="store_true", help="mark inferred triples with a comment")
    p.set_defaults(func=cmd_materialize)

    p = sub.add_parser("validate", parents=[common], help="check a KB against the schema")
    p.add_argument("--kb", required=True, nargs="+")
    p.add_argument("--schema")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("query", parents=[common], help="run a SPARQL SELECT query")
    p.add_argument("--kb", required=True, nargs="+")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query", help="query file")
    group.add_argument("--query-text", help="query string")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("serve", parents=[common], help="serve a KB over the SPARQL protocol")
    p.add_argument("--kb", required=True, nargs="+")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--timeout-ms", type=int, default=10000)
    p.add_argument("--max-query-bytes", type=int, default=65536)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stats", parents=[common], help="triple and instance counts")
    p.add_argument("--kb", required=True, nargs="+")
    p.add_argument("--schema")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("cq", parents=[common], help="competency-question analytics")
    p.add_argument("question", type=int, choices=[1, 2, 3, 4, 5],
                   help="1 countries at or above --level; 2 incidence when --level is first reached; "
                        "3 episodes at or above --level; 4 adoption report; 5 lagged correlation")
    p.add_argument("--kb", required=True, nargs="+")
    p.add_argument("--schema")
    p.add_argument("--indicator", required=True, help="indicator code (h6) or property IRI")
    p.add_argument("--level", type=float, default=1, help="threshold level (cq 1-4)")
    p.add_argument("--country", action="append", help="ISO alpha-3 code or country IRI; repeatable")
    p.add_argument("--outcome", default="roc:new_cases", help="outcome property (cq 2, 4, 5)")
    p.add_argument("--population", type=float, help="express incidence per 100k (cq 2)")
    p.add_argument("--max-lag", type=int, default=14, help="largest lag in days (cq 5)")
    p.add_argument("--mode", choices=["growth", "level"], default="growth",
                   help="cq 5 outcome transform (default: day-over-day growth rate)")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--show-query", action="store_true", help="print the generated SPARQL")
    p.set_defaults(func=cmd_cq)
    return parser


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        sys.stderr.write("commands: ingest, materialize, validate, query, serve, stats, cq\n")
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args, stdout)
    except (Failure, CQError, QueryError, IngestError, SchemaError, TurtleSyntaxError,
            TermError, OSError, ValueError) as exc:
        sys.stderr.write(f"roc-kb {args.command}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
