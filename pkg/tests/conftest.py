from __future__ import annotations

import pytest

from tabqa.table import CellValue, Row, Table


def make_table(columns, grid, caption=None, row_ids=None) -> Table:
    """Build a table from rendered strings, optionally with explicit row ids."""
    ids = row_ids if row_ids is not None else range(1, len(grid) + 1)
    rows = tuple(
        Row(rid, tuple(CellValue.from_raw(c) for c in row))
        for rid, row in zip(ids, grid)
    )
    return Table(tuple(columns), rows, caption)


@pytest.fixture
def exeter_table() -> Table:
    return make_table(
        ["name", "league", "total"],
        [
            ["danny coles", "3", "3"],
            ["john o'flynn", "11", "12"],
            ["jamie cureton", "20", "20"],
        ],
        caption="2012–13 Exeter City F.C. season",
        row_ids=[1, 4, 8],
    )


@pytest.fixture
def small_table() -> Table:
    return make_table(
        ["name", "league", "total"],
        [
            ["danny coles", "3", "3"],
            ["john o'flynn", "11", "12"],
            ["jamie cureton", "20", "20"],
        ],
    )
