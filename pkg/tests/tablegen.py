"""Seeded random table generator shared by the property-style tests."""
from __future__ import annotations

import random

from tabqa.table import CellValue, Row, Table

NAME_POOL = [
    "a", "b", "c", "d", "year", "total", "national cup", "reg. season",
    "1940/41", "notes", "score", "venue",
]

TEXT_POOL = [
    "champion (1)", "did not enter", "x", "y", "semifinals", "n/a",
    "jamie cureton", "North", "south end",
]


def random_cell(rng: random.Random) -> str:
    roll = rng.random()
    if roll < 0.15:
        return ""
    if roll < 0.45:
        return str(rng.randint(-50, 2000))
    if roll < 0.55:
        return f"{rng.randint(0, 99)}.{rng.randint(0, 99)}"
    if roll < 0.62:
        return f"{rng.randint(1, 9)},{rng.randint(100, 999)}"
    return rng.choice(TEXT_POOL)


def random_table(rng: random.Random, max_cols: int = 8, max_rows: int = 6) -> Table:
    n_cols = rng.randint(1, max_cols)
    names = rng.sample(NAME_POOL, n_cols)
    # keep the transpose marker out of the first slot so views stay unambiguous
    if names[0] == "column":
        names[0] = "col0"
    n_rows = rng.randint(0, max_rows)
    rows = tuple(
        Row(i + 1, tuple(CellValue.from_raw(random_cell(rng)) for _ in range(n_cols)))
        for i in range(n_rows)
    )
    caption = rng.choice([None, "demo table", "2012–13 season"])
    return Table(tuple(names), rows, caption)
