"""Parser for the supported SPARQL SELECT subset.

Supported: PREFIX/BASE, SELECT [DISTINCT] with variables, ``*``, standard
``(AGG(?x) AS ?y)`` and bare ``AGG(?x)`` projections (aliased ``agg_x``),
basic graph patterns with ``;`` and ``,`` lists, FILTER with comparisons,
``&&``, ``||``, ``!`` and ``bound()``, GROUP BY, ORDER BY, LIMIT and OFFSET.
Recognised SPARQL features outside that subset raise :class:`UnsupportedFeature`.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from typing import Optional, Union
from urllib.parse import urljoin

from ..terms import (
    RDF_TYPE,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_DOUBLE,
    XSD_INTEGER,
    IRI,
    Literal,
    TermError,
)


class QueryError(ValueError):
    """Base class for query errors that carry a source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{where}{message}")
        self.message = message
        self.line = line
        self.column = column


class QuerySyntaxError(QueryError):
    pass


class UnknownPrefix(QueryError):
    pass


class UnsupportedFeature(QueryError):
    def __init__(self, name: str, line: int = 0, column: int = 0):
        super().__init__(f"unsupported SPARQL feature: {name}", line, column)
        self.name = name


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def projectable(self) -> bool:
        return not self.name.startswith("_:")

    def __str__(self):
        return "?" + self.name


@dataclass(frozen=True)
class Aggregate:
    fn: str  # AVG, SUM, COUNT, MIN, MAX
    var: Optional[Var]  # None for COUNT(*)
    alias: Var
    distinct: bool = False


@dataclass(frozen=True)
class PatternTemplate:
    s: object
    p: object
    o: object

    def variables(self) -> set:
        return {t for t in (self.s, self.p, self.o) if isinstance(t, Var)}


@dataclass(frozen=True)
class Compare:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    expr: object


@dataclass(frozen=True)
class Bound:
    var: Var


Expr = Union[Compare, And, Or, Not, Bound, Var, IRI, Literal]


def expr_variables(expr) -> set:
    if isinstance(expr, Var):
        return {expr}
    if isinstance(expr, Bound):
        return {expr.var}
    if isinstance(expr, Not):
        return expr_variables(expr.expr)
    if isinstance(expr, (And, Or, Compare)):
        return expr_variables(expr.left) | expr_variables(expr.right)
    return set()


@dataclass
class QueryAST:
    prefixes: dict = field(default_factory=dict)
    projection: list = field(default_factory=list)
    select_all: bool = False
    where: list = field(default_factory=list)
    filters: list = field(default_factory=list)
    group_by: list = field(default_factory=list)
    order_by: list = field(default_factory=list)  # (expr, ascending)
    limit: Optional[int] = None
    offset: Optional[int] = None
    distinct: bool = False

    @property
    def aggregates(self) -> list:
        return [p for p in self.projection if isinstance(p, Aggregate)]

    @property
    def is_grouped(self) -> bool:
        return bool(self.group_by or self.aggregates)

    def pattern_variables(self) -> list:
        seen = []
        for pt in self.where:
            for t in (pt.s, pt.p, pt.o):
                if isinstance(t, Var) and t not in seen:
                    seen.append(t)
        return seen

    def output_variables(self) -> list:
        if self.select_all:
            return [v.name for v in self.pattern_variables() if v.projectable]
        return [p.alias.name if isinstance(p, Aggregate) else p.name for p in self.projection]


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<var>[?$][A-Za-z0-9_]+)
  | (?P<string>"(?:[^"\\\n\r]|\\.)*"|'(?:[^'\\\n\r]|\\.)*')
  | (?P<bnode>_:[A-Za-z0-9_](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<double>[+-]?(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)[eE][+-]?[0-9]+)
  | (?P<decimal>[+-]?[0-9]*\.[0-9]+)
  | (?P<integer>[+-]?[0-9]+)
  | (?P<pname>(?:[A-Za-z](?:[A-Za-z0-9_.-]*[A-Za-z0-9_-])?)?:(?:[A-Za-z0-9_:](?:[A-Za-z0-9_.:-]*[A-Za-z0-9_:-])?)?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\^\^|&&|\|\||!=|<=|>=|[=<>!])
  | (?P<punct>[{}().;,*])
  | (?P<path>[/|^?+])
    """,
    re.VERBOSE,
)

_ESCAPE = re.compile(r"\\(u[0-9A-Fa-f]{4}|.)", re.DOTALL)
_SIMPLE_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "'": "'", "\\": "\\"}

AGGREGATES = ("AVG", "SUM", "COUNT", "MIN", "MAX")
_UNSUPPORTED_WORDS = {
    "OPTIONAL": "OPTIONAL",
    "UNION": "UNION",
    "MINUS": "MINUS",
    "BIND": "BIND",
    "VALUES": "VALUES",
    "SERVICE": "SERVICE",
    "GRAPH": "GRAPH",
    "HAVING": "HAVING",
    "FROM": "FROM",
    "CONSTRUCT": "CONSTRUCT",
    "ASK": "ASK",
    "DESCRIBE": "DESCRIBE",
    "INSERT": "SPARQL Update",
    "DELETE": "SPARQL Update",
    "LOAD": "SPARQL Update",
    "CLEAR": "SPARQL Update",
    "DROP": "SPARQL Update",
    "CREATE": "SPARQL Update",
    "REDUCED": "REDUCED",
    "EXISTS": "EXISTS",
    "SAMPLE": "SAMPLE",
    "GROUP_CONCAT": "GROUP_CONCAT",
}


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos

    @property
    def upper(self):
        return self.text.upper() if self.kind == "word" else None


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        self.tokens = self._tokenize()
        self.i = 0
        self.ast = QueryAST()
        self.base: Optional[str] = None
        self.bnode_vars = 0

    def where(self, pos):
        pos = min(pos, max(len(self.text) - 1, 0))
        line = bisect.bisect_right(self.line_starts, pos)
        return line, pos - self.line_starts[line - 1] + 1

    def fail(self, tok_or_pos, message, cls=QuerySyntaxError):
        pos = tok_or_pos.pos if isinstance(tok_or_pos, _Tok) else tok_or_pos
        raise cls(message, *self.where(pos))

    def unsupported(self, tok, name):
        raise UnsupportedFeature(name, *self.where(tok.pos))

    def _tokenize(self):
        tokens = []
        pos, n, text = 0, len(self.text), self.text
        while pos < n:
            m = _TOKEN.match(text, pos)
            if m is None:
                self.fail(pos, f"unexpected character {text[pos]!r}")
            if m.lastgroup != "ws":
                tokens.append(_Tok(m.lastgroup, m.group(), pos))
            pos = m.end()
        tokens.append(_Tok("eof", "", n))
        return tokens

    def peek(self, k=0) -> _Tok:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> _Tok:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def describe(self, tok):
        return "end of query" if tok.kind == "eof" else repr(tok.text)

    def accept_word(self, word) -> bool:
        if self.peek().upper == word:
            self.advance()
            return True
        return False

    def expect_word(self, word):
        tok = self.advance()
        if tok.upper != word:
            self.check_unsupported(tok)
            self.fail(tok, f"expected {word}, found {self.describe(tok)}")

    def accept_punct(self, ch) -> bool:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == ch:
            self.advance()
            return True
        return False

    def expect_punct(self, ch):
        tok = self.advance()
        if tok.kind != "punct" or tok.text != ch:
            self.check_unsupported(tok)
            self.fail(tok, f"expected {ch!r}, found {self.describe(tok)}")

    def check_unsupported(self, tok):
        if tok.upper in _UNSUPPORTED_WORDS:
            self.unsupported(tok, _UNSUPPORTED_WORDS[tok.upper])

    # query

    def parse(self) -> QueryAST:
        self.prologue()
        tok = self.peek()
        self.check_unsupported(tok)
        self.expect_word("SELECT")
        self.select_clause()
        if self.peek().upper == "FROM":
            self.unsupported(self.peek(), "FROM")
        self.accept_word("WHERE")
        self.group_graph_pattern()
        self.solution_modifiers()
        tok = self.peek()
        if tok.kind != "eof":
            self.check_unsupported(tok)
            self.fail(tok, f"unexpected {self.describe(tok)} after query")
        self.check_grouping()
        return self.ast

    def prologue(self):
        while True:
            tok = self.peek()
            if tok.upper == "PREFIX":
                self.advance()
                name = self.advance()
                if name.kind != "pname" or not name.text.endswith(":"):
                    self.fail(name, f"expected a prefix name ending in ':', found {self.describe(name)}")
                ns = self.advance()
                if ns.kind != "iri":
                    self.fail(ns, f"expected an IRI, found {self.describe(ns)}")
                self.ast.prefixes[name.text[:-1]] = self.iri(ns).value
            elif tok.upper == "BASE":
                self.advance()
                ns = self.advance()
                if ns.kind != "iri":
                    self.fail(ns, f"expected an IRI, found {self.describe(ns)}")
                self.base = self.iri(ns).value
            else:
                return

    def select_clause(self):
        if self.accept_word("DISTINCT"):
            self.ast.distinct = True
        elif self.peek().upper == "REDUCED":
            self.unsupported(self.peek(), "REDUCED")
        if self.accept_punct("*"):
            self.ast.select_all = True
            return
        names = set()
        while True:
            tok = self.peek()
            if tok.kind == "var":
                self.advance()
                item = Var(tok.text[1:])
            elif tok.upper in AGGREGATES:
                item = self.aggregate(alias=None)
            elif tok.kind == "punct" and tok.text == "(":
                self.advance()
                inner = self.peek()
                if inner.upper not in AGGREGATES:
                    self.check_unsupported(inner)
                    self.unsupported(inner, "projection expressions")
                agg = self.aggregate(alias=None)
                self.expect_word("AS")
                alias_tok = self.advance()
                if alias_tok.kind != "var":
                    self.fail(alias_tok, f"expected a variable after AS, found {self.describe(alias_tok)}")
                self.expect_punct(")")
                item = Aggregate(agg.fn, agg.var, Var(alias_tok.text[1:]), agg.distinct)
            else:
                break
            name = item.alias.name if isinstance(item, Aggregate) else item.name
            if name in names:
                if isinstance(item, Aggregate) and item.alias.name.startswith(item.fn.lower() + "_"):
                    k = 2
                    while f"{name}_{k}" in names:
                        k += 1
                    item = Aggregate(item.fn, item.var, Var(f"{name}_{k}"), item.distinct)
                    name = item.alias.name
                else:
                    self.fail(tok, f"duplicate projection ?{name}")
            names.add(name)
            self.ast.projection.append(item)
            self.accept_punct(",")
        if not self.ast.projection:
            tok = self.peek()
            self.check_unsupported(tok)
            self.fail(tok, f"expected a projection, found {self.describe(tok)}")

    def aggregate(self, alias) -> Aggregate:
        fn = self.advance().upper
        self.expect_punct("(")
        distinct = self.accept_word("DISTINCT")
        tok = self.advance()
        if tok.kind == "punct" and tok.text == "*":
            if fn != "COUNT":
                self.fail(tok, f"{fn}(*) is not allowed; only COUNT(*)")
            var = None
        elif tok.kind == "var":
            var = Var(tok.text[1:])
        else:
            self.unsupported(tok, "aggregate over expressions")
        self.expect_punct(")")
        auto = f"{fn.lower()}_{var.name if var else 'all'}"
        return Aggregate(fn, var, alias or Var(auto), distinct)

    def group_graph_pattern(self):
        self.expect_punct("{")
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.advance()
                return
            if tok.kind == "eof":
                self.fail(tok, "unexpected end of query, expected '}'")
            if tok.upper == "FILTER":
                self.advance()
                self.ast.filters.append(self.filter_constraint())
                self.accept_punct(".")
                continue
            self.check_unsupported(tok)
            if tok.kind == "punct" and tok.text == "{":
                nxt = self.peek(1)
                self.unsupported(tok, "subqueries" if nxt.upper == "SELECT" else "nested group patterns")
            self.triples_same_subject()
            if not self.accept_punct("."):
                tok = self.peek()
                if not (tok.kind == "punct" and tok.text == "}") and tok.upper != "FILTER":
                    self.check_unsupported(tok)
                    self.fail(tok, f"expected '.' or '}}', found {self.describe(tok)}")

    def triples_same_subject(self):
        subject = self.term(role="subject")
        while True:
            predicate = self.verb()
            while True:
                obj = self.term(role="object")
                self.ast.where.append(PatternTemplate(subject, predicate, obj))
                if not self.accept_punct(","):
                    break
            if not self.accept_punct(";"):
                return
            while self.accept_punct(";"):
                pass
            tok = self.peek()
            if tok.kind == "punct" and tok.text in ".}":
                return
            if tok.upper == "FILTER":
                return

    def verb(self):
        tok = self.peek()
        if tok.kind == "word" and tok.text == "a":
            self.advance()
            term = RDF_TYPE
        elif tok.kind == "punct" and tok.text == "(" or tok.kind in ("path", "op") and tok.text in "^!":
            self.unsupported(tok, "property paths")
        else:
            term = self.term(role="predicate")
            if isinstance(term, Literal):
                self.fail(tok, "a literal cannot be a predicate")
        nxt = self.peek()
        if nxt.kind == "path" or (nxt.kind == "punct" and nxt.text == "*"):
            self.unsupported(nxt, "property paths")
        return term

    def term(self, role):
        tok = self.advance()
        kind = tok.kind
        if kind == "var":
            return Var(tok.text[1:])
        if kind == "iri":
            return self.iri(tok)
        if kind == "pname":
            return self.pname(tok)
        if kind == "bnode":
            if role == "predicate":
                self.fail(tok, "a blank node cannot be a predicate")
            return Var(tok.text)
        if role != "predicate":
            lit = self.literal(tok)
            if lit is not None:
                return lit
        if kind == "punct" and tok.text in "[(":
            self.unsupported(tok, "anonymous blank nodes" if tok.text == "[" else "collections")
        if kind == "punct" and tok.text == "{":
            self.unsupported(tok, "nested group patterns")
        self.check_unsupported(tok)
        self.fail(tok, f"expected {role}, found {self.describe(tok)}")

    def literal(self, tok) -> Optional[Literal]:
        kind = tok.kind
        try:
            if kind == "integer":
                return Literal(tok.text, XSD_INTEGER)
            if kind == "decimal":
                return Literal(tok.text, XSD_DECIMAL)
            if kind == "double":
                return Literal(tok.text, XSD_DOUBLE)
            if kind == "word" and tok.text.lower() in ("true", "false"):
                return Literal(tok.text.lower(), XSD_BOOLEAN)
            if kind == "string":
                lexical = self.unescape(tok)
                nxt = self.peek()
                if nxt.kind == "lang":
                    self.advance()
                    return Literal(lexical, None, nxt.text[1:])
                if nxt.kind == "op" and nxt.text == "^^":
                    self.advance()
                    dt = self.advance()
                    if dt.kind == "iri":
                        datatype = self.iri(dt)
                    elif dt.kind == "pname":
                        datatype = self.pname(dt)
                    else:
                        self.fail(dt, f"expected a datatype IRI, found {self.describe(dt)}")
                    return Literal(lexical, datatype)
                return Literal(lexical)
        except TermError as exc:
            self.fail(tok, str(exc))
        return None

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

    def iri(self, tok) -> IRI:
        value = tok.text[1:-1]
        if self.base is not None and not re.match(r"[A-Za-z][A-Za-z0-9+.-]*:", value):
            value = urljoin(self.base, value)
        try:
            return IRI(value)
        except TermError:
            self.fail(tok, f"malformed or relative IRI <{value}>")

    def pname(self, tok) -> IRI:
        prefix, _, local = tok.text.partition(":")
        ns = self.ast.prefixes.get(prefix)
        if ns is None:
            self.fail(tok, f"unknown prefix {prefix!r}", UnknownPrefix)
        try:
            return IRI(ns + local)
        except TermError:
            self.fail(tok, f"prefixed name expands to a malformed IRI: {ns + local!r}")

    # expressions

    def filter_constraint(self):
        tok = self.peek()
        if tok.upper == "NOT" and self.peek(1).upper == "EXISTS":
            self.unsupported(tok, "NOT EXISTS")
        if tok.upper == "BOUND":
            return self.primary()
        self.expect_punct("(")
        expr = self.or_expr()
        self.expect_punct(")")
        return expr

    def or_expr(self):
        left = self.and_expr()
        while self.peek().kind == "op" and self.peek().text == "||":
            self.advance()
            left = Or(left, self.and_expr())
        return left

    def and_expr(self):
        left = self.relational()
        while self.peek().kind == "op" and self.peek().text == "&&":
            self.advance()
            left = And(left, self.relational())
        return left

    def relational(self):
        left = self.unary()
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("=", "!=", "<", "<=", ">", ">="):
            self.advance()
            return Compare(tok.text, left, self.unary())
        return left

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "!":
            self.advance()
            return Not(self.unary())
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok.kind == "punct" and tok.text == "(":
            self.advance()
            expr = self.or_expr()
            self.expect_punct(")")
            return expr
        if tok.upper == "BOUND":
            self.advance()
            self.expect_punct("(")
            var = self.advance()
            if var.kind != "var":
                self.fail(var, f"bound() takes a variable, found {self.describe(var)}")
            self.expect_punct(")")
            return Bound(Var(var.text[1:]))
        if tok.kind == "word" and tok.text.lower() not in ("true", "false"):
            self.check_unsupported(tok)
            if self.peek(1).kind == "punct" and self.peek(1).text == "(":
                self.unsupported(tok, f"function {tok.text}()")
        if tok.kind == "path" or (tok.kind == "punct" and tok.text == "*"):
            self.unsupported(tok, "arithmetic expressions")
        term = self.term(role="expression")
        nxt = self.peek()
        if nxt.kind == "path" or (nxt.kind == "punct" and nxt.text == "*"):
            self.unsupported(nxt, "arithmetic expressions")
        return term

    # modifiers

    def solution_modifiers(self):
        if self.peek().upper == "GROUP":
            self.advance()
            self.expect_word("BY")
            while self.peek().kind == "var":
                self.ast.group_by.append(Var(self.advance().text[1:]))
            if not self.ast.group_by:
                tok = self.peek()
                if tok.kind == "punct" and tok.text == "(":
                    self.unsupported(tok, "GROUP BY expressions")
                self.fail(tok, f"expected a variable after GROUP BY, found {self.describe(tok)}")
        if self.peek().upper == "HAVING":
            self.unsupported(self.peek(), "HAVING")
        if self.peek().upper == "ORDER":
            self.advance()
            self.expect_word("BY")
            while True:
                tok = self.peek()
                if tok.upper in ("ASC", "DESC"):
                    self.advance()
                    self.expect_punct("(")
                    expr = self.or_expr()
                    self.expect_punct(")")
                    self.ast.order_by.append((expr, tok.upper == "ASC"))
                elif tok.kind == "var":
                    self.advance()
                    self.ast.order_by.append((Var(tok.text[1:]), True))
                elif tok.kind == "punct" and tok.text == "(":
                    self.advance()
                    expr = self.or_expr()
                    self.expect_punct(")")
                    self.ast.order_by.append((expr, True))
                else:
                    break
            if not self.ast.order_by:
                tok = self.peek()
                self.fail(tok, f"expected an ordering condition, found {self.describe(tok)}")
        for _ in range(2):
            tok = self.peek()
            if tok.upper in ("LIMIT", "OFFSET"):
                self.advance()
                num = self.advance()
                if num.kind != "integer" or num.text.startswith(("-", "+")):
                    self.fail(num, f"{tok.upper} takes a non-negative integer, found {self.describe(num)}")
                if tok.upper == "LIMIT":
                    if self.ast.limit is not None:
                        self.fail(tok, "duplicate LIMIT")
                    self.ast.limit = int(num.text)
                else:
                    if self.ast.offset is not None:
                        self.fail(tok, "duplicate OFFSET")
                    self.ast.offset = int(num.text)

    def check_grouping(self):
        ast = self.ast
        if not ast.is_grouped:
            return
        if ast.select_all:
            raise QuerySyntaxError("SELECT * cannot be combined with GROUP BY or aggregates")
        grouped = set(ast.group_by)
        for item in ast.projection:
            if isinstance(item, Var) and item not in grouped:
                raise QuerySyntaxError(
                    f"?{item.name} is projected but neither aggregated nor in GROUP BY"
                )


def parse_query(text: str) -> QueryAST:
    return _Parser(text).parse()
