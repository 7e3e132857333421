"""In-memory table model: typed cells, transpose/filter operations, prompt encodings.

Tables are immutable after construction; every operation returns a new table.
Row identifiers are assigned once at load time (1..N) and survive filtering,
so a row keeps its identity across pipeline stages.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


class TableError(Exception):
    """Base class for table construction and selection errors."""


class StructuralError(TableError):
    """Raised when a raw tabular source is malformed (ragged grid, no header)."""


class SelectionError(TableError):
    """Raised when a column or row selection names something the table lacks."""


# A numeric lexeme: optional sign, digits with optional thousands commas,
# optional single decimal point. "1,234" and "1234" both qualify; "1,23" does not.
_NUMERIC_RE = re.compile(
    r"[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?|[+-]?\.\d+"
)

_TRANSPOSE_LABEL = "column"
_ROW_LABEL_RE = re.compile(r"row (\d+)")


def parse_numeric_lexeme(text: str) -> float | None:
    """Return the numeric value of a lexeme, or None if it is not numeric."""
    trimmed = text.strip()
    if not trimmed or not _NUMERIC_RE.fullmatch(trimmed):
        return None
    return float(trimmed.replace(",", ""))


def render_number(value: float) -> str:
    """Canonical lexeme for a computed number: integral floats drop the point."""
    if math.isfinite(value) and value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


@dataclass(frozen=True)
class CellValue:
    """One table cell: text, number (with its original lexeme), or empty.

    Rendering always returns the preserved lexeme, never a re-formatted value;
    the empty variant renders as the empty string.
    """

    lexeme: str
    number: float | None = None

    @staticmethod
    def from_raw(raw: object) -> "CellValue":
        if raw is None:
            return CellValue("")
        text = raw if isinstance(raw, str) else render_number(float(raw)) if isinstance(raw, (int, float)) else str(raw)
        if text == "":
            return CellValue("")
        return CellValue(text, parse_numeric_lexeme(text))

    @staticmethod
    def from_number(value: float) -> "CellValue":
        return CellValue(render_number(value), float(value))

    @property
    def is_empty(self) -> bool:
        return self.lexeme == ""

    @property
    def is_number(self) -> bool:
        return self.number is not None

    def render(self) -> str:
        return self.lexeme


EMPTY_CELL = CellValue("")


@dataclass(frozen=True)
class Row:
    row_id: int
    cells: tuple[CellValue, ...]


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[Row, ...]
    caption: str | None = None

    def __post_init__(self) -> None:
        if len(set(self.columns)) != len(self.columns):
            raise StructuralError(f"duplicate column names: {list(self.columns)}")
        seen: set[int] = set()
        for row in self.rows:
            if row.row_id <= 0:
                raise StructuralError(f"row_id must be positive, got {row.row_id}")
            if row.row_id in seen:
                raise StructuralError(f"duplicate row_id {row.row_id}")
            seen.add(row.row_id)
            if len(row.cells) != len(self.columns):
                raise StructuralError(
                    f"row {row.row_id} has {len(row.cells)} cells, expected {len(self.columns)}"
                )

    @property
    def row_ids(self) -> tuple[int, ...]:
        return tuple(r.row_id for r in self.rows)

    def column_index(self, name: str) -> int:
        return self.columns.index(name)

    def rendered_grid(self) -> list[list[str]]:
        """Header row followed by rendered data rows (row ids not included)."""
        return [list(self.columns)] + [[c.render() for c in r.cells] for r in self.rows]


@dataclass(frozen=True)
class ColumnSet:
    """Deduplicated column selection, ordered by first appearance in the source table."""

    names: tuple[str, ...]

    @staticmethod
    def from_names(names: Iterable[str], table: Table) -> "ColumnSet":
        wanted = set()
        for name in names:
            if name not in table.columns:
                raise SelectionError(
                    f"unknown column {name!r}; valid columns: {list(table.columns)}"
                )
            wanted.add(name)
        return ColumnSet(tuple(c for c in table.columns if c in wanted))

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class RowIdSet:
    """Deduplicated row_id selection in ascending order."""

    ids: tuple[int, ...]

    @staticmethod
    def from_ids(ids: Iterable[int], table: Table) -> "RowIdSet":
        valid = set(table.row_ids)
        wanted = set()
        for rid in ids:
            if rid not in valid:
                raise SelectionError(
                    f"unknown row_id {rid}; valid ids: {sorted(valid)}"
                )
            wanted.add(rid)
        return RowIdSet(tuple(sorted(wanted)))

    def __len__(self) -> int:
        return len(self.ids)


def sanitize_headers(headers: Sequence[str]) -> list[str]:
    """Lowercase, trim, collapse internal whitespace; disambiguate duplicates with _2, _3, ..."""
    cleaned = [" ".join(str(h).lower().split()) for h in headers]
    seen: dict[str, int] = {}
    result: list[str] = []
    for name in cleaned:
        count = seen.get(name, 0) + 1
        seen[name] = count
        if count == 1:
            result.append(name)
            continue
        candidate = f"{name}_{count}"
        while candidate in cleaned or candidate in result:
            count += 1
            candidate = f"{name}_{count}"
        seen[name] = count
        result.append(candidate)
    return result


def load_table(raw: Mapping) -> Table:
    """Build a Table from a tabular source record {caption?, header, rows}.

    Cells are typed (numeric lexemes keep their original text), rows are
    numbered 1..N, headers are sanitized and deduplicated.
    """
    header = raw.get("header")
    if not isinstance(header, (list, tuple)) or not header:
        raise StructuralError("source record needs a non-empty 'header' list")
    grid = raw.get("rows", [])
    if not isinstance(grid, (list, tuple)):
        raise StructuralError("source record 'rows' must be a list of lists")
    columns = tuple(sanitize_headers(header))
    rows = []
    for i, raw_row in enumerate(grid, start=1):
        if not isinstance(raw_row, (list, tuple)) or len(raw_row) != len(columns):
            raise StructuralError(
                f"row {i} has {len(raw_row) if isinstance(raw_row, (list, tuple)) else 'invalid'} "
                f"cells, expected {len(columns)}"
            )
        rows.append(Row(i, tuple(CellValue.from_raw(c) for c in raw_row)))
    caption = raw.get("caption")
    if caption is not None:
        caption = str(caption)
    return Table(columns, tuple(rows), caption)


def _looks_transposed(t: Table) -> bool:
    if not t.columns or t.columns[0] != _TRANSPOSE_LABEL:
        return False
    return all(_ROW_LABEL_RE.fullmatch(c) for c in t.columns[1:])


def transpose(t: Table) -> Table:
    """Swap rows and columns, prefixing a label column.

    The result's columns are ["column", "row <id>", ...] and its rows carry the
    original column names as first cells. Applying transpose to a table that is
    itself a transposed view restores the original grid (and row ids), making
    the double application an involution on rendered cells.
    """
    if _looks_transposed(t):
        return _untranspose(t)
    columns = (_TRANSPOSE_LABEL,) + tuple(f"row {r.row_id}" for r in t.rows)
    rows = []
    for i, name in enumerate(t.columns):
        cells = [CellValue.from_raw(name)]
        cells.extend(CellValue.from_raw(r.cells[i].render()) for r in t.rows)
        rows.append(Row(i + 1, tuple(cells)))
    return Table(columns, tuple(rows), t.caption)


def _untranspose(t: Table) -> Table:
    row_ids = [int(_ROW_LABEL_RE.fullmatch(c).group(1)) for c in t.columns[1:]]
    columns = tuple(r.cells[0].render() for r in t.rows)
    rows = []
    for j, rid in enumerate(row_ids):
        cells = tuple(CellValue.from_raw(r.cells[j + 1].render()) for r in t.rows)
        rows.append(Row(rid, cells))
    return Table(columns, tuple(rows), t.caption)


def filter_columns(t: Table, c: ColumnSet) -> Table:
    """Restrict to the selected columns, keeping original order, row ids, caption."""
    if not c.names:
        raise SelectionError("column selection must be non-empty")
    for name in c.names:
        if name not in t.columns:
            raise SelectionError(
                f"unknown column {name!r}; valid columns: {list(t.columns)}"
            )
    keep = [i for i, name in enumerate(t.columns) if name in set(c.names)]
    columns = tuple(t.columns[i] for i in keep)
    rows = tuple(Row(r.row_id, tuple(r.cells[i] for i in keep)) for r in t.rows)
    return Table(columns, rows, t.caption)


def filter_rows(t: Table, r: RowIdSet) -> Table:
    """Restrict to the selected row ids, keeping original order and identifiers."""
    if not r.ids:
        raise SelectionError("row selection must be non-empty")
    valid = set(t.row_ids)
    for rid in r.ids:
        if rid not in valid:
            raise SelectionError(f"unknown row_id {rid}; valid ids: {sorted(valid)}")
    keep = set(r.ids)
    rows = tuple(row for row in t.rows if row.row_id in keep)
    return Table(t.columns, rows, t.caption)


def _columns_tail(t: Table) -> str:
    return f"columns: {list(t.columns)!r}"


def encode_pipe(t: Table) -> str:
    """Linear text encoding with `|` separators.

    Layout: optional `table caption:` line, `/`, a `col :` header line, one
    `row <id>:` line per row, `*/`, and a trailing `columns: [...]` list.
    """
    lines = []
    if t.caption is not None:
        lines.append(f"table caption: {t.caption}")
    lines.append("/")
    lines.append("col : " + " | ".join(t.columns))
    for row in t.rows:
        lines.append(f"row {row.row_id}: " + " | ".join(c.render() for c in row.cells))
    lines.append("*/")
    lines.append(_columns_tail(t))
    return "\n".join(lines)


def parse_pipe(text: str) -> Table:
    """Inverse of encode_pipe; reconstructs columns, row ids, and rendered cells."""
    lines = text.split("\n")
    pos = 0
    caption = None
    if pos < len(lines) and lines[pos].startswith("table caption: "):
        caption = lines[pos][len("table caption: "):]
        pos += 1
    if pos >= len(lines) or lines[pos] != "/":
        raise StructuralError("expected '/' after caption")
    pos += 1
    if pos >= len(lines) or not lines[pos].startswith("col : "):
        raise StructuralError("expected 'col :' header line")
    columns = tuple(lines[pos][len("col : "):].split(" | "))
    pos += 1
    rows = []
    while pos < len(lines) and lines[pos] != "*/":
        m = re.match(r"row (\d+): ", lines[pos])
        if not m:
            raise StructuralError(f"malformed row line: {lines[pos]!r}")
        fields = lines[pos][m.end():].split(" | ")
        rows.append(Row(int(m.group(1)), tuple(CellValue.from_raw(f) for f in fields)))
        pos += 1
    if pos >= len(lines):
        raise StructuralError("missing '*/' terminator")
    return Table(columns, tuple(rows), caption)


def _column_sql_type(t: Table, index: int) -> str:
    cells = [r.cells[index] for r in t.rows if not r.cells[index].is_empty]
    if not cells or not all(c.is_number for c in cells):
        return "text"
    if any("." in c.lexeme for c in cells):
        return "real"
    return "int"


def sql_schema_encoding(t: Table, token_budget: int) -> tuple[str, int]:
    """CREATE TABLE schema plus tab-separated rows; returns (text, rows kept).

    Trailing data rows are dropped until the whole rendering fits the token
    budget (a degenerate budget keeps the schema and header only).
    """
    name = t.caption if t.caption is not None else "w"
    schema = [f"CREATE TABLE {name}("]
    schema.append("\trow_id int,")
    for i, col in enumerate(t.columns):
        terminator = ")" if i == len(t.columns) - 1 else ","
        schema.append(f"\t{col} {_column_sql_type(t, i)}{terminator}")
    header = "\t".join(["row_id", *t.columns])
    data = ["\t".join([str(r.row_id), *(c.render() for c in r.cells)]) for r in t.rows]

    def assemble(kept: int) -> str:
        lines = list(schema)
        lines.append("/")
        lines.append("All rows of the table:")
        lines.append("SELECT * FROM w;")
        lines.append(header)
        lines.extend(data[:kept])
        lines.append("/")
        lines.append(_columns_tail(t))
        return "\n".join(lines)

    kept = len(data)
    text = assemble(kept)
    while kept > 0 and token_estimate(text) > token_budget:
        kept -= 1
        text = assemble(kept)
    return text, kept


def encode_sql_schema(t: Table, token_budget: int) -> str:
    return sql_schema_encoding(t, token_budget)[0]


def cell_count(t: Table) -> int:
    return len(t.rows) * len(t.columns)


def token_estimate(s: str) -> int:
    """Deterministic model-free token proxy: one token per whitespace-separated
    run, plus ceil(len/8)-1 extra for long runs."""
    total = 0
    for run in s.split():
        total += 1 + (len(run) + 7) // 8 - 1
    return total
