from __future__ import annotations

import pytest

from tabqa.prompting import (
    build_col_sql_prompt,
    build_col_text_prompt,
    build_reason_text_prompt,
    render_evidence_slot,
    render_result_block,
    scan_answer,
    scan_columns_line,
    scan_rows_line,
    scan_sql,
    scan_yes_no,
)
from tabqa.sql import execute, parse_query


class TestScanSql:
    def test_fenced_with_language_tag(self):
        assert scan_sql("```sql\nSELECT a FROM w\n```") == "SELECT a FROM w"

    def test_fenced_without_tag(self):
        assert scan_sql("```\nSELECT a\nFROM w\n```") == "SELECT a\nFROM w"

    def test_plain_select_line(self):
        text = "Sure, here is the query:\nSELECT a FROM w WHERE b = 1\nHope it helps"
        assert scan_sql(text) == "SELECT a FROM w WHERE b = 1"

    def test_sql_tag_prefix(self):
        assert scan_sql("SQL: SELECT a FROM w") == "SELECT a FROM w"

    def test_unfenced_takes_first_select_line_only(self):
        text = "SELECT a FROM w\nmore prose"
        assert scan_sql(text) == "SELECT a FROM w"

    def test_fenced_statement_may_span_lines(self):
        text = "```sql\nSELECT a FROM w\nWHERE b = 1\n```"
        assert scan_sql(text) == "SELECT a FROM w\nWHERE b = 1"

    def test_no_select_anywhere(self):
        assert scan_sql("I cannot write SQL for this.") is None

    def test_single_line_fence(self):
        assert scan_sql("```SELECT a FROM w```") == "SELECT a FROM w"


class TestScanLists:
    def test_columns_line(self):
        text = "thinking...\ncolumns: ['year', 'national cup']"
        assert scan_columns_line(text) == ["year", "national cup"]

    def test_last_columns_line_wins(self):
        text = "columns: ['a']\nbetter:\ncolumns: ['b']"
        assert scan_columns_line(text) == ["b"]

    def test_columns_empty(self):
        assert scan_columns_line("columns: []") == []

    def test_columns_missing(self):
        assert scan_columns_line("no structured output") is None

    def test_rows_line(self):
        assert scan_rows_line("rows: [1, 18]") == [1, 18]

    def test_rows_with_labels(self):
        assert scan_rows_line("rows: ['row 1', 'row 18']") == [1, 18]

    def test_rows_empty(self):
        assert scan_rows_line("rows: []") == []


class TestScanAnswer:
    def test_payload(self):
        assert scan_answer("reasoning...\nAnswer: 17 years") == "17 years"

    def test_last_answer_wins(self):
        assert scan_answer("Answer: draft\nAnswer: final") == "final"

    def test_empty_payload_is_none(self):
        assert scan_answer("Answer:") is None

    def test_missing_is_none(self):
        assert scan_answer("no answer line") is None

    def test_case_insensitive(self):
        assert scan_answer("ANSWER: yes") == "yes"


class TestScanYesNo:
    @pytest.mark.parametrize("text,expected", [
        ("YES", True), ("no", False), ("Yes, it does.", True),
        ("The answer is NO.", False), ("maybe", None), ("", None),
    ])
    def test_cases(self, text, expected):
        assert scan_yes_no(text) is expected


class TestPromptBuilders:
    def test_col_sql_contains_schema_and_question(self, small_table):
        prompt, kept = build_col_sql_prompt(small_table, "who?", 10_000)
        assert "CREATE TABLE" in prompt
        assert "question: who?" in prompt
        assert kept == 3

    def test_col_sql_truncates(self, small_table):
        _, kept = build_col_sql_prompt(small_table, "who?", 1)
        assert kept == 0

    def test_col_text_prior_rendering(self, small_table):
        from tabqa.table import transpose

        prompt = build_col_text_prompt(transpose(small_table), "who?", ["name"])
        assert "candidate columns: ['name']" in prompt
        assert "col : column | row 1 | row 2 | row 3" in prompt

    def test_evidence_block_before_question(self, small_table):
        rs = execute(parse_query("SELECT SUM(total) FROM w"), small_table)
        prompt = build_reason_text_prompt(
            small_table, "total?", "short_qa", render_evidence_slot(rs)
        )
        assert "SQL evidence:\ncol : sum(total)\nrow 1: 35" in prompt
        assert prompt.index("SQL evidence:") < prompt.index("question: total?")

    def test_no_evidence_slot_is_clean(self, small_table):
        prompt = build_reason_text_prompt(small_table, "total?", "short_qa", "")
        assert "SQL evidence" not in prompt
        assert "{evidence}" not in prompt

    def test_unknown_task_rejected(self, small_table):
        with pytest.raises(ValueError):
            build_reason_text_prompt(small_table, "q", "bogus", "")

    def test_result_block_mini_table(self, small_table):
        rs = execute(parse_query("SELECT name FROM w WHERE total > 5"), small_table)
        block = render_result_block(rs)
        assert block == "col : name\nrow 1: john o'flynn\nrow 2: jamie cureton"
