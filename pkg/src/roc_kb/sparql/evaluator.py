"""Evaluation of parsed queries against a :class:`~roc_kb.store.Store`.

Basic graph patterns are joined by nested index lookups, most-bound pattern
first. Results are bags; when the query has no ORDER BY the rows come out in
canonical term order so that output is stable across processes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .._alloc import collector_paused
from ..terms import (
    XSD_BOOLEAN,
    XSD_DATE,
    XSD_DECIMAL,
    XSD_DOUBLE,
    XSD_INTEGER,
    XSD_STRING,
    RDF_LANGSTRING,
    NUMERIC_DATATYPES,
    BlankNode,
    IRI,
    Literal,
    date_value,
    format_decimal,
    format_double,
    numeric_value,
)
from .parser import (
    Aggregate,
    And,
    Bound,
    Compare,
    Not,
    Or,
    QueryAST,
    Var,
    expr_variables,
    parse_query,
)


class QueryTimeout(RuntimeError):
    pass


@dataclass
class SolutionTable:
    variables: list
    rows: list = field(default_factory=list)  # dicts: name -> term, unbound names absent

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        return [row.get(name) for row in self.rows]

    def as_tuples(self) -> list:
        return [tuple(row.get(v) for v in self.variables) for row in self.rows]


ERROR = object()  # SPARQL type error / unbound in expression evaluation
_TRUE = Literal("true", XSD_BOOLEAN)
_FALSE = Literal("false", XSD_BOOLEAN)
_DT_RANK = {XSD_INTEGER: 0, XSD_DECIMAL: 1, XSD_DOUBLE: 2}


# expressions

def _value(expr, row):
    if isinstance(expr, Var):
        return row.get(expr.name, ERROR)
    if isinstance(expr, (IRI, Literal, BlankNode)):
        return expr
    result = eval_filter(expr, row)
    if result is ERROR:
        return ERROR
    return _TRUE if result else _FALSE


def _is_nan(x):
    return isinstance(x, float) and math.isnan(x)


def compare_values(op: str, a, b):
    """Compare two terms; returns True, False (never ERROR for bound terms)."""
    if a.__class__ is Literal and b.__class__ is Literal:
        da, db = a.datatype, b.datatype
        if da in NUMERIC_DATATYPES and db in NUMERIC_DATATYPES:
            x, y = numeric_value(a), numeric_value(b)
            if _is_nan(x) or _is_nan(y):
                return op == "!="
            return _apply(op, x, y)
        if da == XSD_DATE and db == XSD_DATE:
            return _apply(op, date_value(a), date_value(b))
        if da == XSD_STRING and db == XSD_STRING:
            return _apply(op, a.lexical, b.lexical)
        if da == RDF_LANGSTRING and db == RDF_LANGSTRING and a.lang == b.lang:
            return _apply(op, a.lexical, b.lexical)
        if da == XSD_BOOLEAN and db == XSD_BOOLEAN:
            return _apply(op, a.lexical in ("true", "1"), b.lexical in ("true", "1"))
    # different kinds: only term (in)equality is meaningful
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    return False


def _apply(op, x, y):
    if op == "=":
        return x == y
    if op == "!=":
        return x != y
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    return x >= y


def _ebv(term):
    if term.__class__ is not Literal:
        return ERROR
    if term.datatype == XSD_BOOLEAN:
        return term.lexical in ("true", "1")
    if term.datatype in NUMERIC_DATATYPES:
        v = numeric_value(term)
        return not (_is_nan(v) or v == 0)
    if term.datatype in (XSD_STRING, RDF_LANGSTRING):
        return term.lexical != ""
    return ERROR


def eval_filter(expr, row):
    """Three-valued evaluation: True, False or ERROR."""
    cls = expr.__class__
    if cls is Compare:
        a = _value(expr.left, row)
        b = _value(expr.right, row)
        if a is ERROR or b is ERROR:
            return ERROR
        return compare_values(expr.op, a, b)
    if cls is And:
        left = eval_filter(expr.left, row)
        if left is False:
            return False
        right = eval_filter(expr.right, row)
        if right is False:
            return False
        if left is ERROR or right is ERROR:
            return ERROR
        return True
    if cls is Or:
        left = eval_filter(expr.left, row)
        if left is True:
            return True
        right = eval_filter(expr.right, row)
        if right is True:
            return True
        if left is ERROR or right is ERROR:
            return ERROR
        return False
    if cls is Not:
        inner = eval_filter(expr.expr, row)
        return ERROR if inner is ERROR else not inner
    if cls is Bound:
        return expr.var.name in row
    value = _value(expr, row)
    if value is ERROR:
        return ERROR
    return _ebv(value)


# ordering

def order_key(term):
    """ORDER BY / MIN / MAX key: unbound < blank < IRI < numbers < dates < other literals."""
    if term is None:
        return (0,)
    cls = term.__class__
    if cls is BlankNode:
        return (1, term.label)
    if cls is IRI:
        return (2, term.value)
    if term.datatype in NUMERIC_DATATYPES:
        v = numeric_value(term)
        if _is_nan(v):
            return (3, 1, 0, term.sort_key)
        return (3, 0, v, term.sort_key)
    if term.datatype == XSD_DATE:
        return (4, date_value(term), term.sort_key)
    return (5, term.sort_key)


def _row_key(row, names):
    return tuple((0,) if row.get(n) is None else (1,) + row[n].sort_key for n in names)


# BGP

def _resolve(t, row):
    if t.__class__ is Var:
        return row.get(t.name)
    return t


def _plan(patterns, store):
    """Greedy join order: most bound positions first, then smallest index range."""
    estimate = []
    for pt in patterns:
        consts = [None if isinstance(t, Var) else t for t in (pt.s, pt.p, pt.o)]
        estimate.append(store.count(*consts) if any(c is not None for c in consts) else len(store))
    remaining = list(range(len(patterns)))
    bound: set = set()
    order = []
    while remaining:
        def score(i):
            pt = patterns[i]
            nbound = sum(1 for t in (pt.s, pt.p, pt.o) if not isinstance(t, Var) or t in bound)
            return (-nbound, estimate[i], i)

        best = min(remaining, key=score)
        remaining.remove(best)
        order.append(best)
        bound |= patterns[best].variables()
    return order


def _join(ast: QueryAST, store, deadline):
    patterns = ast.where
    pending = list(ast.filters)
    rows = [{}]
    bound: set = set()
    checks = 0
    for idx in _plan(patterns, store):
        pt = patterns[idx]
        slots = [(pos, t.name) for pos, t in enumerate((pt.s, pt.p, pt.o)) if t.__class__ is Var]
        out = []
        for row in rows:
            s = _resolve(pt.s, row)
            p = _resolve(pt.p, row)
            o = _resolve(pt.o, row)
            if p is not None and p.__class__ is not IRI:
                continue
            if s is not None and s.__class__ is Literal:
                continue
            for triple in store.triples(s, p, o):
                new = dict(row)
                ok = True
                for pos, name in slots:
                    have = new.get(name)
                    if have is None:
                        new[name] = triple[pos]
                    elif have != triple[pos]:
                        ok = False
                        break
                if ok:
                    out.append(new)
            checks += 1
            if deadline is not None and checks % 512 == 0 and time.monotonic() > deadline:
                raise QueryTimeout("query evaluation exceeded its time budget")
        rows = out
        bound |= pt.variables()
        ready = [f for f in pending if expr_variables(f) <= bound]
        if ready:
            pending = [f for f in pending if f not in ready]
            rows = [r for r in rows if all(eval_filter(f, r) is True for f in ready)]
        if not rows:
            break
    if pending:
        rows = [r for r in rows if all(eval_filter(f, r) is True for f in pending)]
    # query blank nodes are existential: drop them from solutions
    hidden = [v.name for v in ast.pattern_variables() if not v.projectable]
    if hidden:
        for r in rows:
            for name in hidden:
                r.pop(name, None)
    if deadline is not None and time.monotonic() > deadline:
        raise QueryTimeout("query evaluation exceeded its time budget")
    return rows


# aggregation

def _numeric_total(values):
    total = 0
    rank = 0
    for v in values:
        total += numeric_value(v)
        rank = max(rank, _DT_RANK[v.datatype])
    return total, rank


def _number_literal(value, rank):
    if rank == 0:
        return Literal(str(int(value)), XSD_INTEGER)
    if rank == 1:
        return Literal(format_decimal(Fraction(value)), XSD_DECIMAL)
    return Literal(format_double(float(value)), XSD_DOUBLE)


def compute_aggregate(agg: Aggregate, rows: list):
    if agg.var is None:
        return Literal(str(len(rows)), XSD_INTEGER)
    values = [r[agg.var.name] for r in rows if agg.var.name in r]
    if agg.distinct:
        values = list(dict.fromkeys(values))
    fn = agg.fn
    if fn == "COUNT":
        return Literal(str(len(values)), XSD_INTEGER)
    numeric = [v for v in values if v.__class__ is Literal and v.datatype in NUMERIC_DATATYPES]
    if fn == "SUM":
        total, rank = _numeric_total(numeric)
        return _number_literal(total, rank)
    if fn == "AVG":
        if not numeric:
            return None
        total, rank = _numeric_total(numeric)
        if rank == 2:
            return _number_literal(float(total) / len(numeric), 2)
        return _number_literal(Fraction(total) / len(numeric), 1)
    # MIN / MAX: numbers take priority over other terms
    pool = numeric or values
    if not pool:
        return None
    pick = min if fn == "MIN" else max
    return pick(pool, key=order_key)


def _group(ast: QueryAST, rows: list) -> list:
    keys = [v.name for v in ast.group_by]
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r.get(k) for k in keys), []).append(r)
    if not groups and not keys:
        groups[()] = []
    out = []
    for key, members in groups.items():
        result = {k: v for k, v in zip(keys, key) if v is not None}
        for agg in ast.aggregates:
            value = compute_aggregate(agg, members)
            if value is not None:
                result[agg.alias.name] = value
        out.append(result)
    return out


# driver

def evaluate(ast, store, timeout: Optional[float] = None) -> SolutionTable:
    """Run a query (text or parsed) over a store; ``timeout`` is in seconds."""
    if isinstance(ast, str):
        ast = parse_query(ast)
    deadline = time.monotonic() + timeout if timeout else None
    with collector_paused():
        rows = _join(ast, store, deadline)
        if ast.is_grouped:
            rows = _group(ast, rows)
    variables = ast.output_variables()

    # canonical order first so ties under ORDER BY stay deterministic
    all_names = variables + sorted({n for r in rows for n in r} - set(variables))
    rows.sort(key=lambda r: _row_key(r, all_names))
    for expr, ascending in reversed(ast.order_by):
        rows.sort(key=lambda r: order_key(_order_value(expr, r)), reverse=not ascending)

    projected = [{n: r[n] for n in variables if n in r} for r in rows]
    if ast.distinct:
        seen = set()
        unique = []
        for r in projected:
            k = tuple(r.get(n) for n in variables)
            if k not in seen:
                seen.add(k)
                unique.append(r)
        projected = unique
    start = ast.offset or 0
    stop = start + ast.limit if ast.limit is not None else None
    return SolutionTable(variables, projected[start:stop])


def _order_value(expr, row):
    value = _value(expr, row)
    return None if value is ERROR else value
