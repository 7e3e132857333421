"""Binding and evaluation of parsed queries over a single in-memory table.

The bound table is always addressed as `w`; whatever name the query uses in
FROM resolves to it. A pseudo-column `row_id` is always queryable. Every
result row carries the set of source row ids that produced it, which is how
row selections are recovered from arbitrary projections.

Comparison semantics: when both operands coerce to numbers the comparison is
numeric, otherwise it is a case-insensitive string comparison of the rendered
values (empty cells render as ""). There is no SQL NULL tri-state.
"""
from __future__ import annotations

import re
from typing import Sequence

from ..table import EMPTY_CELL, CellValue, ColumnSet, RowIdSet, Row, Table
from .ast import (
    Aggregate,
    And,
    Arith,
    Between,
    ColumnRef,
    Comparison,
    Condition,
    Expr,
    InList,
    Like,
    Negate,
    Not,
    NumberLit,
    Or,
    OrderItem,
    QueryAst,
    ResultRow,
    ResultSet,
    SelectItem,
    Star,
    StringLit,
    expr_text,
)

ROW_ID = "row_id"


class BindError(Exception):
    """A query references something the bound table cannot supply."""


def _unknown_column(name: str, table: Table) -> BindError:
    valid = [*table.columns, ROW_ID]
    return BindError(f"unknown column {name!r}; valid columns: {valid}")


def _resolve_ref(ref: ColumnRef, table: Table) -> Expr:
    if ref.name in table.columns or ref.name == ROW_ID:
        return ColumnRef(ref.name, ref.quoted)
    folded = ref.name.casefold()
    for col in table.columns:
        if col.casefold() == folded:
            return ColumnRef(col, ref.quoted)
    if folded == ROW_ID:
        return ColumnRef(ROW_ID, ref.quoted)
    if ref.quoted:
        # Double-quoted text that is not a column is taken as a string literal.
        return StringLit(ref.name)
    raise _unknown_column(ref.name, table)


def _bind_expr(expr: Expr, table: Table) -> Expr:
    if isinstance(expr, (NumberLit, StringLit)):
        return expr
    if isinstance(expr, ColumnRef):
        return _resolve_ref(expr, table)
    if isinstance(expr, Aggregate):
        if isinstance(expr.arg, Star):
            return expr
        bound = _resolve_ref(expr.arg, table)
        if not isinstance(bound, ColumnRef):
            raise BindError(f"aggregate over non-column {expr.arg.name!r}")
        return Aggregate(expr.func, bound)
    if isinstance(expr, Arith):
        return Arith(expr.op, _bind_expr(expr.left, table), _bind_expr(expr.right, table))
    if isinstance(expr, Negate):
        return Negate(_bind_expr(expr.operand, table))
    raise TypeError(f"not an expression node: {expr!r}")


def _bind_cond(cond: Condition, table: Table) -> Condition:
    if isinstance(cond, Comparison):
        return Comparison(cond.op, _bind_expr(cond.left, table), _bind_expr(cond.right, table))
    if isinstance(cond, Like):
        return Like(_bind_expr(cond.operand, table), cond.pattern, cond.negated)
    if isinstance(cond, InList):
        return InList(
            _bind_expr(cond.operand, table),
            tuple(_bind_expr(i, table) for i in cond.items),
            cond.negated,
        )
    if isinstance(cond, Between):
        return Between(
            _bind_expr(cond.operand, table),
            _bind_expr(cond.low, table),
            _bind_expr(cond.high, table),
            cond.negated,
        )
    if isinstance(cond, And):
        return And(tuple(_bind_cond(p, table) for p in cond.parts))
    if isinstance(cond, Or):
        return Or(tuple(_bind_cond(p, table) for p in cond.parts))
    if isinstance(cond, Not):
        return Not(_bind_cond(cond.operand, table))
    raise TypeError(f"not a condition node: {cond!r}")


def _contains_aggregate(node) -> bool:
    if isinstance(node, Aggregate):
        return True
    if isinstance(node, Arith):
        return _contains_aggregate(node.left) or _contains_aggregate(node.right)
    if isinstance(node, Negate):
        return _contains_aggregate(node.operand)
    if isinstance(node, (Comparison, Between)):
        return any(_contains_aggregate(x) for x in
                   ([node.left, node.right] if isinstance(node, Comparison)
                    else [node.operand, node.low, node.high]))
    if isinstance(node, (Like,)):
        return _contains_aggregate(node.operand)
    if isinstance(node, InList):
        return _contains_aggregate(node.operand)
    if isinstance(node, (And, Or)):
        return any(_contains_aggregate(p) for p in node.parts)
    if isinstance(node, Not):
        return _contains_aggregate(node.operand)
    return False


def _bare_refs_outside_aggregates(expr: Expr) -> list[str]:
    if isinstance(expr, ColumnRef):
        return [expr.name]
    if isinstance(expr, Arith):
        return _bare_refs_outside_aggregates(expr.left) + _bare_refs_outside_aggregates(expr.right)
    if isinstance(expr, Negate):
        return _bare_refs_outside_aggregates(expr.operand)
    return []


def bind(ast: QueryAst, table: Table) -> QueryAst:
    """Resolve column references and validate aggregate placement."""
    items = []
    for item in ast.items:
        if isinstance(item.expr, Star):
            items.append(item)
        else:
            items.append(SelectItem(_bind_expr(item.expr, table), item.alias))
    where = _bind_cond(ast.where, table) if ast.where is not None else None
    if where is not None and _contains_aggregate(where):
        raise BindError("aggregates are not allowed in WHERE")
    group_by = []
    for ref in ast.group_by:
        bound = _resolve_ref(ref, table)
        if not isinstance(bound, ColumnRef):
            raise BindError(f"GROUP BY over non-column {ref.name!r}")
        group_by.append(bound)
    order_by = tuple(
        OrderItem(_bind_expr(o.expr, table), o.descending) for o in ast.order_by
    )

    grouped = bool(group_by)
    aggregate_query = grouped or any(
        not isinstance(i.expr, Star) and _contains_aggregate(i.expr) for i in items
    ) or any(_contains_aggregate(o.expr) for o in order_by)
    if aggregate_query:
        group_names = {g.name for g in group_by}
        for item in items:
            if isinstance(item.expr, Star):
                raise BindError("'*' cannot be combined with aggregation")
            for name in _bare_refs_outside_aggregates(item.expr):
                if name not in group_names:
                    raise BindError(
                        f"column {name!r} must appear in GROUP BY or inside an aggregate"
                    )
        for o in order_by:
            for name in _bare_refs_outside_aggregates(o.expr):
                if name not in group_names:
                    raise BindError(
                        f"column {name!r} must appear in GROUP BY or inside an aggregate"
                    )
    return QueryAst(tuple(items), ast.table_name, where, tuple(group_by), order_by, ast.limit)


# --- evaluation ---


def _cell_of(row: Row, table: Table, name: str) -> CellValue:
    if name == ROW_ID:
        return CellValue(str(row.row_id), float(row.row_id))
    return row.cells[table.column_index(name)]


def _literal_cell(expr: Expr) -> CellValue:
    if isinstance(expr, NumberLit):
        return CellValue(expr.lexeme, expr.value)
    if isinstance(expr, StringLit):
        return CellValue.from_raw(expr.value)
    raise TypeError(f"not a literal: {expr!r}")


def _arith(op: str, left: CellValue, right: CellValue) -> CellValue:
    if left.number is None or right.number is None:
        return EMPTY_CELL
    if op == "+":
        return CellValue.from_number(left.number + right.number)
    if op == "-":
        return CellValue.from_number(left.number - right.number)
    if op == "*":
        return CellValue.from_number(left.number * right.number)
    if right.number == 0:
        return EMPTY_CELL
    return CellValue.from_number(left.number / right.number)


def _eval_row_expr(expr: Expr, row: Row, table: Table) -> CellValue:
    if isinstance(expr, (NumberLit, StringLit)):
        return _literal_cell(expr)
    if isinstance(expr, ColumnRef):
        return _cell_of(row, table, expr.name)
    if isinstance(expr, Arith):
        return _arith(expr.op, _eval_row_expr(expr.left, row, table),
                      _eval_row_expr(expr.right, row, table))
    if isinstance(expr, Negate):
        inner = _eval_row_expr(expr.operand, row, table)
        return EMPTY_CELL if inner.number is None else CellValue.from_number(-inner.number)
    if isinstance(expr, Aggregate):
        raise BindError("aggregate in row context")
    raise TypeError(f"not an expression node: {expr!r}")


def _eval_aggregate(agg: Aggregate, rows: Sequence[Row], table: Table) -> CellValue:
    if isinstance(agg.arg, Star):
        return CellValue.from_number(len(rows))
    cells = [_cell_of(r, table, agg.arg.name) for r in rows]
    if agg.func == "COUNT":
        return CellValue.from_number(sum(1 for c in cells if not c.is_empty))
    values = [c.number for c in cells if c.number is not None]
    if not values:
        return EMPTY_CELL
    if agg.func == "SUM":
        return CellValue.from_number(sum(values))
    if agg.func == "AVG":
        return CellValue.from_number(sum(values) / len(values))
    if agg.func == "MIN":
        return CellValue.from_number(min(values))
    return CellValue.from_number(max(values))


def _eval_agg_expr(expr: Expr, rows: Sequence[Row], table: Table) -> CellValue:
    if isinstance(expr, (NumberLit, StringLit)):
        return _literal_cell(expr)
    if isinstance(expr, Aggregate):
        return _eval_aggregate(expr, rows, table)
    if isinstance(expr, ColumnRef):
        # Validated at bind time to be a group column: constant within the group.
        if not rows:
            return EMPTY_CELL
        return _cell_of(rows[0], table, expr.name)
    if isinstance(expr, Arith):
        return _arith(expr.op, _eval_agg_expr(expr.left, rows, table),
                      _eval_agg_expr(expr.right, rows, table))
    if isinstance(expr, Negate):
        inner = _eval_agg_expr(expr.operand, rows, table)
        return EMPTY_CELL if inner.number is None else CellValue.from_number(-inner.number)
    raise TypeError(f"not an expression node: {expr!r}")


def compare_cells(left: CellValue, right: CellValue) -> int:
    """-1/0/1 ordering: numeric when both coerce, else case-insensitive text."""
    if left.number is not None and right.number is not None:
        a, b = left.number, right.number
    else:
        a, b = left.render().casefold(), right.render().casefold()
    return (a > b) - (a < b)


def _like_regex(pattern: str) -> re.Pattern:
    out = []
    for ch in pattern:
        if ch == "%":
            out.append(".*")
        elif ch == "_":
            out.append(".")
        else:
            out.append(re.escape(ch))
    return re.compile("".join(out), re.IGNORECASE | re.DOTALL)


def _eval_cond(cond: Condition, row: Row, table: Table) -> bool:
    if isinstance(cond, Comparison):
        cmp = compare_cells(_eval_row_expr(cond.left, row, table),
                            _eval_row_expr(cond.right, row, table))
        return {
            "=": cmp == 0, "!=": cmp != 0,
            "<": cmp < 0, "<=": cmp <= 0,
            ">": cmp > 0, ">=": cmp >= 0,
        }[cond.op]
    if isinstance(cond, Like):
        text = _eval_row_expr(cond.operand, row, table).render()
        hit = _like_regex(cond.pattern).fullmatch(text) is not None
        return hit != cond.negated
    if isinstance(cond, InList):
        operand = _eval_row_expr(cond.operand, row, table)
        hit = any(
            compare_cells(operand, _eval_row_expr(item, row, table)) == 0
            for item in cond.items
        )
        return hit != cond.negated
    if isinstance(cond, Between):
        operand = _eval_row_expr(cond.operand, row, table)
        low = _eval_row_expr(cond.low, row, table)
        high = _eval_row_expr(cond.high, row, table)
        hit = compare_cells(low, operand) <= 0 and compare_cells(operand, high) <= 0
        return hit != cond.negated
    if isinstance(cond, And):
        return all(_eval_cond(p, row, table) for p in cond.parts)
    if isinstance(cond, Or):
        return any(_eval_cond(p, row, table) for p in cond.parts)
    if isinstance(cond, Not):
        return not _eval_cond(cond.operand, row, table)
    raise TypeError(f"not a condition node: {cond!r}")


def _group_key_part(cell: CellValue) -> tuple:
    if cell.is_empty:
        return (2, "")
    if cell.number is not None:
        return (0, cell.number)
    return (1, cell.render().casefold())


def _sort_key(cell: CellValue) -> tuple:
    return _group_key_part(cell)


def _output_name(item: SelectItem) -> str:
    return item.alias if item.alias is not None else expr_text(item.expr)


def execute(ast: QueryAst, table: Table) -> ResultSet:
    """Evaluate a query with bag semantics and per-row source provenance."""
    bound = bind(ast, table)
    rows = [r for r in table.rows
            if bound.where is None or _eval_cond(bound.where, r, table)]

    grouped = bool(bound.group_by)
    aggregate_query = grouped or any(
        not isinstance(i.expr, Star) and _contains_aggregate(i.expr)
        for i in bound.items
    ) or any(_contains_aggregate(o.expr) for o in bound.order_by)

    out_rows: list[ResultRow]
    order_pools: list[Sequence[Row]]
    if grouped:
        groups: dict[tuple, list[Row]] = {}
        for r in rows:
            key = tuple(_group_key_part(_cell_of(r, table, g.name)) for g in bound.group_by)
            groups.setdefault(key, []).append(r)
        out_rows = []
        order_pools = []
        for members in groups.values():  # insertion order: first appearance
            values = tuple(_eval_agg_expr(i.expr, members, table) for i in bound.items)
            out_rows.append(ResultRow(frozenset(m.row_id for m in members), values))
            order_pools.append(members)
    elif aggregate_query:
        values = tuple(_eval_agg_expr(i.expr, rows, table) for i in bound.items)
        out_rows = [ResultRow(frozenset(r.row_id for r in rows), values)]
        order_pools = [rows]
    else:
        out_rows = []
        order_pools = []
        for r in rows:
            values: list[CellValue] = []
            for item in bound.items:
                if isinstance(item.expr, Star):
                    values.extend(r.cells)
                else:
                    values.append(_eval_row_expr(item.expr, r, table))
            out_rows.append(ResultRow(frozenset({r.row_id}), tuple(values)))
            order_pools.append([r])

    if bound.order_by:
        indexed = list(range(len(out_rows)))

        def key_for(order_item: OrderItem, idx: int) -> tuple:
            if aggregate_query:
                cell = _eval_agg_expr(order_item.expr, order_pools[idx], table)
            else:
                cell = _eval_row_expr(order_item.expr, order_pools[idx][0], table)
            return _sort_key(cell)

        for order_item in reversed(bound.order_by):
            indexed.sort(key=lambda idx: key_for(order_item, idx),
                         reverse=order_item.descending)
        out_rows = [out_rows[i] for i in indexed]

    if bound.limit is not None:
        out_rows = out_rows[: bound.limit]

    columns: list[str] = []
    for item in bound.items:
        if isinstance(item.expr, Star):
            columns.extend(table.columns)
        else:
            columns.append(_output_name(item))
    return ResultSet(tuple(columns), tuple(out_rows))


def referenced_columns(ast: QueryAst, table: Table) -> ColumnSet:
    """Table columns appearing anywhere in the query (row_id excluded), in table order."""
    bound = bind(ast, table)
    names: set[str] = set()

    def walk_expr(expr) -> None:
        if isinstance(expr, Star):
            names.update(table.columns)
        elif isinstance(expr, ColumnRef):
            if expr.name != ROW_ID:
                names.add(expr.name)
        elif isinstance(expr, Aggregate):
            walk_expr(expr.arg)
        elif isinstance(expr, Arith):
            walk_expr(expr.left)
            walk_expr(expr.right)
        elif isinstance(expr, Negate):
            walk_expr(expr.operand)

    def walk_cond(cond) -> None:
        if isinstance(cond, Comparison):
            walk_expr(cond.left)
            walk_expr(cond.right)
        elif isinstance(cond, Like):
            walk_expr(cond.operand)
        elif isinstance(cond, InList):
            walk_expr(cond.operand)
            for item in cond.items:
                walk_expr(item)
        elif isinstance(cond, Between):
            walk_expr(cond.operand)
            walk_expr(cond.low)
            walk_expr(cond.high)
        elif isinstance(cond, (And, Or)):
            for p in cond.parts:
                walk_cond(p)
        elif isinstance(cond, Not):
            walk_cond(cond.operand)

    for item in bound.items:
        walk_expr(item.expr)
    if bound.where is not None:
        walk_cond(bound.where)
    for g in bound.group_by:
        walk_expr(g)
    for o in bound.order_by:
        walk_expr(o.expr)
    return ColumnSet(tuple(c for c in table.columns if c in names))


def result_row_ids(rs: ResultSet) -> RowIdSet:
    """Ascending union of all source row ids across result rows."""
    ids: set[int] = set()
    for row in rs.rows:
        ids.update(row.source_row_ids)
    return RowIdSet(tuple(sorted(ids)))
