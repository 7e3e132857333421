"""Golden end-to-end fixture: the soccer-club worked example.

An 18-row season table where the national cup was won in the first and last
seasons; the question asks how long the second win took. The scripted stage
completions drive the pipeline through column extraction {year} -> {year,
national cup}, row extraction {18} -> {1, 18}, a fired math branch, and an
evidence query subtracting the two win years.
"""
from __future__ import annotations

import json
from pathlib import Path

from tabqa.config import PROFILES, Profile
from tabqa.gateway import FixtureStore, exchange_digest
from tabqa.prompting import (
    build_col_sql_prompt,
    build_col_text_prompt,
    build_math_classify_prompt,
    build_reason_sql_prompt,
    build_reason_text_prompt,
    build_row_sql_prompt,
    build_row_text_prompt,
    render_evidence_slot,
)
from tabqa.sql import execute, parse_query
from tabqa.table import ColumnSet, RowIdSet, Table, filter_columns, filter_rows, load_table, transpose

GOLDEN_QUESTION = (
    "How long did it take the New York Americans to win the National Cup after 1936?"
)
GOLDEN_ANSWER = "17 years"

_CUP_FILLER = ["did not enter", "1st round", "2nd round", "semifinals", "quarterfinals"]


def golden_table_record() -> dict:
    rows = []
    for i in range(18):
        year = 1936 + i
        cup = "champion (1)" if i in (0, 17) else _CUP_FILLER[i % len(_CUP_FILLER)]
        rows.append([
            str(year),
            "1",
            "asl",
            f"{(i % 7) + 1}th",
            "no playoff" if i % 3 else "champion",
            cup,
        ])
    return {
        "caption": "new york americans (soccer)",
        "header": ["year", "division", "league", "reg. season", "playoffs", "national cup"],
        "rows": rows,
    }


def golden_table() -> Table:
    return load_table(golden_table_record())

COL_SQL_COMPLETION = "```sql\nSELECT year FROM w\n```"
COL_TEXT_COMPLETION = (
    "the question needs the cup outcome as well as the year.\n"
    "columns: ['year', 'national cup']"
)
ROW_SQL_COMPLETION = (
    "```sql\nSELECT * FROM w WHERE \"national cup\" = 'champion (1)' AND year > 1936\n```"
)
ROW_TEXT_COMPLETION = "the first win in row 1 is the reference point.\nrows: [1, 18]"
MATH_COMPLETION = "YES"
REASON_SQL_COMPLETION = "```sql\nSELECT MAX(year) - MIN(year) FROM w\n```"
REASON_TEXT_COMPLETION = (
    "The club won in 1936 and again in 1953, 17 years later.\nAnswer: 17 years"
)


def write_golden_fixtures(
    fixtures_dir: Path, profile: Profile | None = None, template_dir=None,
    token_budget: int = 4000,
) -> Path:
    """Author the replay fixtures for the golden example; returns the directory."""
    profile = profile or PROFILES["default"]
    store = FixtureStore(fixtures_dir)
    t = golden_table()
    question = GOLDEN_QUESTION

    def put(stage: str, prompt: str, completion: str) -> None:
        params = profile.params[stage]
        store.save(
            exchange_digest(stage, prompt),
            {
                "stage": stage,
                "prompt": prompt,
                "params": params.to_dict(),
                "completions": [completion] * params.n_samples,
            },
        )

    prompt, _ = build_col_sql_prompt(t, question, token_budget, template_dir)
    put("col_sql", prompt, COL_SQL_COMPLETION)

    put(
        "col_text",
        build_col_text_prompt(transpose(t), question, ["year"], template_dir),
        COL_TEXT_COMPLETION,
    )

    t_c = filter_columns(t, ColumnSet(("year", "national cup")))
    prompt, _ = build_row_sql_prompt(t_c, question, token_budget, template_dir)
    put("row_sql", prompt, ROW_SQL_COMPLETION)

    put(
        "row_text",
        build_row_text_prompt(t_c, question, [18], template_dir),
        ROW_TEXT_COMPLETION,
    )

    put("math_classify", build_math_classify_prompt(question, template_dir), MATH_COMPLETION)

    t_cr = filter_rows(t_c, RowIdSet((1, 18)))
    prompt, _ = build_reason_sql_prompt(t_cr, question, token_budget, template_dir)
    put("reason_sql", prompt, REASON_SQL_COMPLETION)

    evidence_result = execute(
        parse_query("SELECT MAX(year) - MIN(year) FROM w"), t_cr
    )
    put(
        "reason_text",
        build_reason_text_prompt(
            t_cr, question, "short_qa", render_evidence_slot(evidence_result), template_dir
        ),
        REASON_TEXT_COMPLETION,
    )
    return Path(fixtures_dir)


def write_golden_dataset(path: Path) -> Path:
    record = {
        "id": "golden-ny-americans",
        "task": "short_qa",
        "table": golden_table_record(),
        "question": GOLDEN_QUESTION,
        "gold": GOLDEN_ANSWER,
    }
    path.write_text(json.dumps(record, ensure_ascii=False) + "\n", encoding="utf-8")
    return path
