from .evaluator import QueryTimeout, SolutionTable, evaluate
from .parser import (
    Aggregate,
    PatternTemplate,
    QueryAST,
    QueryError,
    QuerySyntaxError,
    UnknownPrefix,
    UnsupportedFeature,
    Var,
    parse_query,
)
from .results import FORMATS, serialize_results

__all__ = [
    "Aggregate",
    "FORMATS",
    "PatternTemplate",
    "QueryAST",
    "QueryError",
    "QuerySyntaxError",
    "QueryTimeout",
    "SolutionTable",
    "UnknownPrefix",
    "UnsupportedFeature",
    "Var",
    "evaluate",
    "parse_query",
    "serialize_results",
]
