"""Turtle and N-Triples reading and writing.

Supported Turtle: ``@prefix``/``PREFIX``, ``@base``/``BASE``, prefixed names,
the ``a`` keyword, ``;`` and ``,`` lists, bare integer/decimal/double/boolean
literals, typed and language-tagged literals, ``#`` comments and ``_:x``
blank node labels. Collections ``( )`` and anonymous blank nodes ``[ ]`` are
rejected.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import Optional
from urllib.parse import urljoin

from .terms import (
    RDF_TYPE,
    XSD,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_DOUBLE,
    XSD_INTEGER,
    XSD_STRING,
    IRI,
    BlankNode,
    Graph,
    Literal,
    TermError,
    Triple,
)

SYNTAXES = ("turtle", "ntriples")


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"line {self.line}, column {self.column}: {self.message}"


class TurtleSyntaxError(ValueError):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


_PN_PREFIX = r"[A-Za-z](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?"
_PN_LOCAL = r"[A-Za-z0-9_:](?:[A-Za-z0-9_.:-]*[A-Za-z0-9_:-])?"
_BNODE = r"[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?"

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<iri><[^>\n]*>)
  | (?P<string>"(?:[^"\\\n\r]|\\.)*"|'(?:[^'\\\n\r]|\\.)*')
  | (?P<bnode>_:""" + _BNODE + r""")
  | (?P<directive>@(?:prefix|base)\b)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<double>[+-]?(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)[eE][+-]?[0-9]+)
  | (?P<decimal>[+-]?[0-9]*\.[0-9]+)
  | (?P<integer>[+-]?[0-9]+)
  | (?P<pname>(?:""" + _PN_PREFIX + r""")?:(?:""" + _PN_LOCAL + r""")?)
  | (?P<word>[A-Za-z][A-Za-z0-9_]*)
  | (?P<dtype>\^\^)
  | (?P<punct>[.;,\[\]()])
    """,
    re.VERBOSE,
)

_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*:")
_ESCAPE = re.compile(r"\\(u[0-9A-Fa-f]{4}|.)", re.DOTALL)
_SIMPLE_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\"}


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


class _Parser:
    def __init__(self, text: str, ntriples: bool):
        self.text = text
        self.ntriples = ntriples
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        self.graph = Graph()
        self.base: Optional[str] = None
        self.iris: dict = {}
        self.tokens = self._tokenize()
        self.i = 0

    # diagnostics

    def fail(self, pos: int, message: str):
        if self.text:
            pos = min(pos, len(self.text) - 1)
        line = bisect.bisect_right(self.line_starts, pos)
        column = pos - self.line_starts[line - 1] + 1
        raise TurtleSyntaxError(ParseDiagnostic(line, column, message))

    def _tokenize(self):
        tokens = []
        text = self.text
        pos = 0
        n = len(text)
        match = _TOKEN.match
        while pos < n:
            m = match(text, pos)
            if m is None:
                self.fail(pos, f"unexpected character {text[pos]!r}")
            kind = m.lastgroup
            if kind != "ws":
                tokens.append(_Tok(kind, m.group(), pos))
            pos = m.end()
        tokens.append(_Tok("eof", "", n))
        return tokens

    # token helpers

    def peek(self) -> _Tok:
        return self.tokens[self.i]

    def advance(self) -> _Tok:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_punct(self, ch: str):
        tok = self.advance()
        if tok.kind != "punct" or tok.text != ch:
            what = "end of input" if tok.kind == "eof" else repr(tok.text)
            self.fail(tok.pos, f"expected {ch!r}, found {what}")

    # grammar

    def parse(self) -> Graph:
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind == "directive" or (
                tok.kind == "word" and tok.text.upper() in ("PREFIX", "BASE")
            ):
                if self.ntriples:
                    self.fail(tok.pos, "directives are not allowed in N-Triples")
                self.directive()
            else:
                self.triples()
        return self.graph

    def directive(self):
        tok = self.advance()
        keyword = tok.text.lstrip("@").lower()
        sparql_style = tok.kind == "word"
        if keyword == "prefix":
            name = self.advance()
            if name.kind != "pname" or not name.text.endswith(":"):
                self.fail(name.pos, "expected a prefix name ending in ':'")
            ns = self.advance()
            if ns.kind != "iri":
                self.fail(ns.pos, "expected an IRI after the prefix name")
            self.graph.prefixes[name.text[:-1]] = self.iri_text(ns).value
        else:
            ns = self.advance()
            if ns.kind != "iri":
                self.fail(ns.pos, "expected an IRI after base")
            self.base = self.iri_text(ns).value
        if not sparql_style:
            self.expect_punct(".")

    def triples(self):
        subject = self.subject()
        self.predicate_object_list(subject)
        self.expect_punct(".")

    def predicate_object_list(self, subject):
        while True:
            predicate = self.predicate()
            while True:
                obj = self.object()
                self.graph.add(Triple(subject, predicate, obj))
                tok = self.peek()
                if tok.kind == "punct" and tok.text == ",":
                    if self.ntriples:
                        self.fail(tok.pos, "object lists are not allowed in N-Triples")
                    self.advance()
                    continue
                break
            tok = self.peek()
            if tok.kind == "punct" and tok.text == ";":
                if self.ntriples:
                    self.fail(tok.pos, "predicate lists are not allowed in N-Triples")
                while self.peek().kind == "punct" and self.peek().text == ";":
                    self.advance()
                nxt = self.peek()
                if nxt.kind == "punct" and nxt.text == ".":
                    return
                continue
            return

    def subject(self):
        tok = self.advance()
        if tok.kind == "iri":
            return self.iri_text(tok)
        if tok.kind == "pname" and not self.ntriples:
            return self.pname(tok)
        if tok.kind == "bnode":
            return BlankNode(tok.text[2:])
        self.unsupported_or_fail(tok, "subject")

    def predicate(self):
        tok = self.advance()
        if tok.kind == "iri":
            return self.iri_text(tok)
        if tok.kind == "pname" and not self.ntriples:
            return self.pname(tok)
        if tok.kind == "word" and tok.text == "a" and not self.ntriples:
            return RDF_TYPE
        self.unsupported_or_fail(tok, "predicate")

    def object(self):
        tok = self.advance()
        kind = tok.kind
        if kind == "iri":
            return self.iri_text(tok)
        if kind == "bnode":
            return BlankNode(tok.text[2:])
        if kind == "string":
            return self.literal(tok)
        if not self.ntriples:
            if kind == "pname":
                return self.pname(tok)
            if kind == "integer":
                return Literal(tok.text, XSD_INTEGER)
            if kind == "decimal":
                return Literal(tok.text, XSD_DECIMAL)
            if kind == "double":
                return Literal(tok.text, XSD_DOUBLE)
            if kind == "word" and tok.text in ("true", "false"):
                return Literal(tok.text, XSD_BOOLEAN)
        self.unsupported_or_fail(tok, "object")

    def unsupported_or_fail(self, tok, role):
        if tok.kind == "punct" and tok.text in "[(":
            self.fail(tok.pos, f"{'anonymous blank nodes' if tok.text == '[' else 'collections'} are not supported")
        if tok.kind == "eof":
            self.fail(tok.pos, f"unexpected end of input, expected {role}")
        self.fail(tok.pos, f"unexpected {tok.text!r}, expected {role}")

    def literal(self, tok):
        lexical = self.unescape(tok)
        nxt = self.peek()
        try:
            if nxt.kind == "lang":
                self.advance()
                return Literal(lexical, None, nxt.text[1:])
            if nxt.kind == "dtype":
                self.advance()
                dt_tok = self.advance()
                if dt_tok.kind == "iri":
                    datatype = self.iri_text(dt_tok)
                elif dt_tok.kind == "pname" and not self.ntriples:
                    datatype = self.pname(dt_tok)
                else:
                    self.fail(dt_tok.pos, "expected a datatype IRI after '^^'")
                return Literal(lexical, datatype)
            return Literal(lexical, XSD_STRING)
        except TermError as exc:
            self.fail(tok.pos, str(exc))

    def unescape(self, tok):
        body = tok.text[1:-1]
        if "\\" not in body:
            return body

        def repl(m):
            esc = m.group(1)
            if esc[0] == "u" and len(esc) == 5:
                return chr(int(esc[1:], 16))
            if esc in _SIMPLE_ESCAPES:
                return _SIMPLE_ESCAPES[esc]
            self.fail(tok.pos + 1 + m.start(), f"unsupported escape sequence '\\{esc}'")

        return _ESCAPE.sub(repl, body)

    def iri_text(self, tok):
        value = tok.text[1:-1]
        cached = self.iris.get(value)
        if cached is not None:
            return cached
        relative = not _SCHEME.match(value)
        if relative and self.base is not None:
            value = urljoin(self.base, value)
        try:
            iri = IRI(value)
        except TermError:
            self.fail(tok.pos, f"malformed or relative IRI <{value}>")
        if not relative:
            self.iris[value] = iri
        return iri

    def pname(self, tok):
        prefix, _, local = tok.text.partition(":")
        ns = self.graph.prefixes.get(prefix)
        if ns is None:
            self.fail(tok.pos, f"undeclared prefix {prefix!r}")
        key = ns + local
        cached = self.iris.get(key)
        if cached is None:
            try:
                cached = IRI(key)
            except TermError:
                self.fail(tok.pos, f"prefixed name expands to a malformed IRI: {key!r}")
            self.iris[key] = cached
        return cached


_NT_IRI = r"<([^<>\x00-\x20]*)>"
_NT_LINE = re.compile(
    r"[ \t]*(?:"
    r"(?:" + _NT_IRI + r"|_:(" + _BNODE + r"))"
    r"[ \t]+" + _NT_IRI + r"[ \t]+"
    r"(?:" + _NT_IRI + r"|_:(" + _BNODE + r")"
    r'|"((?:[^"\\\n\r]|\\.)*)"(?:@([A-Za-z]+(?:-[A-Za-z0-9]+)*)|\^\^' + _NT_IRI + r")?)"
    r"[ \t]*\.)?[ \t]*(?:#[^\n]*)?\r?\Z"
)


# the shape written by serialize_ntriples, tried before the general line grammar;
# IRI characters are left to the IRI constructor, which rejects the same set
_NT_LOOSE_IRI = r"<([^>]*)>"
_NT_CANONICAL = re.compile(
    _NT_LOOSE_IRI + " " + _NT_LOOSE_IRI + " "
    r'(?:' + _NT_LOOSE_IRI + r'|"([^"\\\n\r]*)"(?:\^\^' + _NT_LOOSE_IRI + r"|@([A-Za-z]+(?:-[A-Za-z0-9]+)*))?) \.\Z"
)


class _Fallback(Exception):
    pass


def _parse_ntriples_fast(text: str, add=None) -> Graph:
    """Line-oriented N-Triples reader; raises _Fallback on anything unusual.

    With ``add`` given, triples go to that callable (duplicates included) instead.
    """
    graph = Graph()
    if add is None:
        add = graph._triples.add
    iris: dict = {}
    bnodes: dict = {}
    literals: dict = {}
    match = _NT_LINE.match
    canonical = _NT_CANONICAL.match

    def iri(v):
        t = iris.get(v)
        if t is None:
            t = iris[v] = IRI(v)
        return t

    def bnode(v):
        t = bnodes.get(v)
        if t is None:
            t = bnodes[v] = BlankNode(v)
        return t

    get_iri = iris.get
    get_literal = literals.get
    make = tuple.__new__
    try:
        for line in text.split("\n"):
            m = canonical(line)
            if m is not None:
                s_iri, p, o_iri, lex, dt, lang = m.groups()
                s = get_iri(s_iri) or iri(s_iri)
                if o_iri is not None:
                    o = get_iri(o_iri) or iri(o_iri)
                else:
                    key = (lex, lang, dt)
                    o = get_literal(key)
                    if o is None:
                        o = literals[key] = Literal(lex, iri(dt) if dt is not None else None, lang)
                add(make(Triple, (s, get_iri(p) or iri(p), o)))
                continue
            m = match(line)
            if m is None:
                raise _Fallback
            s_iri, s_bn, p, o_iri, o_bn, lex, lang, dt = m.groups()
            if p is None:
                continue
            if s_iri is not None:
                s = get_iri(s_iri) or iri(s_iri)
            else:
                s = bnode(s_bn)
            if o_iri is not None:
                o = get_iri(o_iri) or iri(o_iri)
            elif o_bn is not None:
                o = bnode(o_bn)
            else:
                if "\\" in lex:
                    raise _Fallback
                key = (lex, lang, dt)
                o = get_literal(key)
                if o is None:
                    o = literals[key] = Literal(lex, iri(dt) if dt is not None else None, lang)
            add(make(Triple, (s, get_iri(p) or iri(p), o)))
    except (_Fallback, TermError):
        raise _Fallback
    return graph


def parse(text: str, syntax: str = "turtle") -> Graph:
    """Parse Turtle or N-Triples text into a :class:`Graph`."""
    if syntax not in SYNTAXES:
        raise ValueError(f"unknown syntax {syntax!r}; expected one of {SYNTAXES}")
    if text.startswith("﻿"):
        text = text[1:]
    if syntax == "ntriples":
        try:
            return _parse_ntriples_fast(text)
        except _Fallback:
            pass
    return _Parser(text, ntriples=(syntax == "ntriples")).parse()


def read_triples(path, syntax: Optional[str] = None) -> list:
    """Triples of a file as a list, possibly with repeats; cheaper than a Graph for bulk loads."""
    path = str(path)
    if syntax is None:
        syntax = "ntriples" if path.endswith(".nt") else "turtle"
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if syntax == "ntriples":
        if text.startswith("\ufeff"):
            text = text[1:]
        out: list = []
        try:
            _parse_ntriples_fast(text, out.append)
            return out
        except _Fallback:
            pass
    return list(parse(text, syntax))


def parse_file(path, syntax: Optional[str] = None) -> Graph:
    path = str(path)
    if syntax is None:
        syntax = "ntriples" if path.endswith(".nt") else "turtle"
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), syntax)


# serialization

_SHORTHAND = {
    XSD_INTEGER: re.compile(r"[+-]?[0-9]+\Z"),
    XSD_DECIMAL: re.compile(r"[+-]?[0-9]*\.[0-9]+\Z"),
    XSD_DOUBLE: re.compile(r"[+-]?(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)[eE][+-]?[0-9]+\Z"),
    XSD_BOOLEAN: re.compile(r"(?:true|false)\Z"),
}
_LOCAL_OK = re.compile(_PN_LOCAL + r"\Z")


def serialize(graph: Graph, syntax: str = "turtle") -> str:
    if syntax == "ntriples":
        return serialize_ntriples(graph)
    if syntax == "turtle":
        return serialize_turtle(graph)
    raise ValueError(f"unknown syntax {syntax!r}; expected one of {SYNTAXES}")


def serialize_ntriples(triples) -> str:
    """One triple per line, sorted by term order; byte-stable for equal graphs."""
    ordered = sorted(triples, key=lambda t: t.sort_key)
    return "".join(t.n3() + "\n" for t in ordered)


class _Namer:
    def __init__(self, prefixes: dict):
        # longest namespace first so the most specific prefix wins
        self.prefixes = sorted(prefixes.items(), key=lambda kv: (-len(kv[1]), kv[0]))

    def iri(self, iri: IRI) -> str:
        value = iri.value
        for name, ns in self.prefixes:
            if value.startswith(ns):
                local = value[len(ns):]
                if local == "" or _LOCAL_OK.match(local):
                    return f"{name}:{local}"
        return f"<{value}>"

    def term(self, term) -> str:
        if term.__class__ is IRI:
            return self.iri(term)
        if term.__class__ is BlankNode:
            return term.n3()
        if term.lang is None and term.datatype in _SHORTHAND:
            if _SHORTHAND[term.datatype].match(term.lexical):
                return term.lexical
        if term.lang is None and term.datatype != XSD_STRING:
            head = term.n3().rsplit("^^", 1)[0]
            return f"{head}^^{self.iri(term.datatype)}"
        return term.n3()


def serialize_turtle(graph: Graph) -> str:
    namer = _Namer(graph.prefixes)
    out = []
    for name, ns in sorted(graph.prefixes.items()):
        out.append(f"@prefix {name}: <{ns}> .\n")
    by_subject: dict = {}
    for s, p, o in graph:
        by_subject.setdefault(s, {}).setdefault(p, []).append(o)
    for s in sorted(by_subject, key=lambda t: t.sort_key):
        if out:
            out.append("\n")
        preds = by_subject[s]
        order = sorted(preds, key=lambda p: (p != RDF_TYPE, p.sort_key))
        lines = []
        for p in order:
            verb = "a" if p == RDF_TYPE else namer.iri(p)
            objs = sorted(preds[p], key=lambda t: t.sort_key)
            lines.append(f"{verb} " + ", ".join(namer.term(o) for o in objs))
        out.append(namer.term(s) + " " + " ;\n    ".join(lines) + " .\n")
    return "".join(out)


def default_prefixes() -> dict:
    from .terms import CODO, OWL, RDF, RDFS, ROC

    return {"rdf": RDF, "rdfs": RDFS, "owl": OWL, "xsd": XSD, "roc": ROC, "codo": CODO}
