"""SQL-subset parser and evaluator over a single in-memory table."""
from .ast import QueryAst, ResultRow, ResultSet, expr_text
from .executor import BindError, compare_cells, execute, referenced_columns, result_row_ids
from .parser import ParseError, parse_query

__all__ = [
    "BindError",
    "ParseError",
    "QueryAst",
    "ResultRow",
    "ResultSet",
    "compare_cells",
    "execute",
    "expr_text",
    "parse_query",
    "referenced_columns",
    "result_row_ids",
]
