"""AST node types for the SQL subset, plus the tabular result type."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..table import CellValue

AGGREGATES = ("COUNT", "SUM", "MIN", "MAX", "AVG")
COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class NumberLit:
    value: float
    lexeme: str


@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class ColumnRef:
    name: str
    # Double-quoted tokens are resolved at bind time: a matching column name
    # binds as a column, anything else falls back to a string literal.
    quoted: bool = False


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class Aggregate:
    func: str  # one of AGGREGATES
    arg: Union[ColumnRef, Star]


@dataclass(frozen=True)
class Arith:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Negate:
    operand: "Expr"


Expr = Union[NumberLit, StringLit, ColumnRef, Aggregate, Arith, Negate]


@dataclass(frozen=True)
class Comparison:
    op: str  # one of COMPARE_OPS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Like:
    operand: Expr
    pattern: str
    negated: bool = False


@dataclass(frozen=True)
class InList:
    operand: Expr
    items: tuple[Expr, ...]
    negated: bool = False


@dataclass(frozen=True)
class Between:
    operand: Expr
    low: Expr
    high: Expr
    negated: bool = False


@dataclass(frozen=True)
class And:
    parts: tuple["Condition", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Condition", ...]


@dataclass(frozen=True)
class Not:
    operand: "Condition"


Condition = Union[Comparison, Like, InList, Between, And, Or, Not]


@dataclass(frozen=True)
class SelectItem:
    expr: Union[Expr, Star]
    alias: str | None = None


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class QueryAst:
    items: tuple[SelectItem, ...]
    table_name: str
    where: Condition | None = None
    group_by: tuple[ColumnRef, ...] = ()
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None


@dataclass(frozen=True)
class ResultRow:
    source_row_ids: frozenset[int]
    values: tuple[CellValue, ...]


@dataclass(frozen=True)
class ResultSet:
    columns: tuple[str, ...]
    rows: tuple[ResultRow, ...]

    def rendered(self) -> list[list[str]]:
        return [[v.render() for v in row.values] for row in self.rows]


def expr_text(node: Union[Expr, Star]) -> str:
    """Deterministic textual form of an expression, used for output column names."""
    if isinstance(node, Star):
        return "*"
    if isinstance(node, NumberLit):
        return node.lexeme
    if isinstance(node, StringLit):
        return f"'{node.value}'"
    if isinstance(node, ColumnRef):
        return node.name
    if isinstance(node, Aggregate):
        return f"{node.func.lower()}({expr_text(node.arg)})"
    if isinstance(node, Arith):
        return f"{expr_text(node.left)} {node.op} {expr_text(node.right)}"
    if isinstance(node, Negate):
        return f"-{expr_text(node.operand)}"
    raise TypeError(f"not an expression node: {node!r}")
