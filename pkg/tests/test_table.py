from __future__ import annotations

import random

import pytest

from conftest import make_table
from tablegen import random_table
from tabqa.table import (
    CellValue,
    ColumnSet,
    RowIdSet,
    SelectionError,
    StructuralError,
    cell_count,
    encode_pipe,
    encode_sql_schema,
    filter_columns,
    filter_rows,
    load_table,
    parse_pipe,
    sql_schema_encoding,
    token_estimate,
    transpose,
)

EXETER_B1 = (
    "CREATE TABLE 2012–13 Exeter City F.C. season(\n"
    "\trow_id int,\n"
    "\tname text,\n"
    "\tleague int,\n"
    "\ttotal int)\n"
    "/\n"
    "All rows of the table:\n"
    "SELECT * FROM w;\n"
    "row_id\tname\tleague\ttotal\n"
    "1\tdanny coles\t3\t3\n"
    "4\tjohn o'flynn\t11\t12\n"
    "8\tjamie cureton\t20\t20\n"
    "/\n"
    "columns: ['name', 'league', 'total']"
)

EXETER_B2 = (
    "table caption: 2012–13 Exeter City F.C. season\n"
    "/\n"
    "col : name | league | total\n"
    "row 1: danny coles | 3 | 3\n"
    "row 4: john o'flynn | 11 | 12\n"
    "row 8: jamie cureton | 20 | 20\n"
    "*/\n"
    "columns: ['name', 'league', 'total']"
)


class TestCellValue:
    def test_numeric_parse_keeps_lexeme(self):
        cell = CellValue.from_raw("3")
        assert cell.number == 3.0
        assert cell.render() == "3"

    def test_thousands_commas(self):
        cell = CellValue.from_raw("1,234")
        assert cell.number == 1234.0
        assert cell.render() == "1,234"

    @pytest.mark.parametrize("raw", ["1,23", "n/a", "12a", "", "--"])
    def test_non_numeric(self, raw):
        assert CellValue.from_raw(raw).number is None

    def test_empty_renders_empty(self):
        assert CellValue.from_raw("").render() == ""
        assert CellValue.from_raw("").is_empty


class TestLoadTable:
    def test_appendix_sample_renumbers_rows(self):
        t = load_table({
            "header": ["name", "league", "total"],
            "rows": [["danny coles", "3", "3"],
                     ["john o'flynn", "11", "12"],
                     ["jamie cureton", "20", "20"]],
        })
        assert t.columns == ("name", "league", "total")
        assert t.row_ids == (1, 2, 3)

    def test_empty_grid(self):
        t = load_table({"header": ["a"], "rows": []})
        assert cell_count(t) == 0

    def test_ragged_grid_names_row(self):
        with pytest.raises(StructuralError, match="row 2"):
            load_table({"header": ["a", "b"], "rows": [["1", "2"], ["3"]]})

    def test_duplicate_headers_get_suffixes(self):
        t = load_table({"header": ["A", " a ", "a"], "rows": []})
        assert t.columns == ("a", "a_2", "a_3")

    def test_header_sanitization(self):
        t = load_table({"header": ["  Reg.   Season "], "rows": [["x"]]})
        assert t.columns == ("reg. season",)

    def test_missing_header_rejected(self):
        with pytest.raises(StructuralError):
            load_table({"rows": [["x"]]})
        with pytest.raises(StructuralError):
            load_table({"header": [], "rows": []})


class TestTranspose:
    def test_2x3(self):
        t = make_table(["a", "b", "c"], [["1", "2", "3"], ["4", "5", "6"]])
        tt = transpose(t)
        assert tt.columns == ("column", "row 1", "row 2")
        assert len(tt.rows) == 3
        assert tt.rows[0].cells[0].render() == "a"

    def test_1x1(self):
        t = make_table(["c"], [["x"]])
        tt = transpose(t)
        assert tt.columns == ("column", "row 1")
        assert [(r.row_id, [c.render() for c in r.cells]) for r in tt.rows] == [(1, ["c", "x"])]

    def test_double_transpose_restores_grid(self):
        rng = random.Random(7)
        for _ in range(200):
            t = random_table(rng)
            back = transpose(transpose(t))
            assert back.rendered_grid() == t.rendered_grid()
            assert back.row_ids == t.row_ids
            assert back.columns == t.columns


class TestFilters:
    def test_column_filter_keeps_row_ids_and_order(self, exeter_table):
        t = filter_columns(exeter_table, ColumnSet(("total", "name")))
        assert t.columns == ("name", "total")  # original table order
        assert t.row_ids == (1, 4, 8)
        assert t.caption == exeter_table.caption

    def test_column_filter_identity(self, exeter_table):
        t = filter_columns(exeter_table, ColumnSet(exeter_table.columns))
        assert t == exeter_table

    def test_unknown_column_lists_valid(self, exeter_table):
        with pytest.raises(SelectionError, match="murdered"):
            filter_columns(exeter_table, ColumnSet(("murdered",)))

    def test_row_filter_preserves_ids(self, exeter_table):
        t = filter_rows(exeter_table, RowIdSet((1, 8)))
        assert t.row_ids == (1, 8)

    def test_row_filter_identity(self, exeter_table):
        assert filter_rows(exeter_table, RowIdSet((1, 4, 8))) == exeter_table

    def test_row_filter_single(self):
        t = make_table(["a"], [["x"]])
        assert filter_rows(t, RowIdSet((1,))) == t

    def test_unknown_row_id(self, exeter_table):
        with pytest.raises(SelectionError):
            filter_rows(exeter_table, RowIdSet((2,)))

    def test_filters_commute_and_multiply(self):
        rng = random.Random(11)
        for _ in range(200):
            t = random_table(rng)
            if not t.rows:
                continue
            cols = ColumnSet(tuple(
                c for i, c in enumerate(t.columns) if i % 2 == 0
            ))
            ids = RowIdSet(tuple(rid for rid in t.row_ids if rid % 2 == 1))
            if not cols.names or not ids.ids:
                continue
            a = filter_rows(filter_columns(t, cols), ids)
            b = filter_columns(filter_rows(t, ids), cols)
            assert a == b
            assert cell_count(a) == len(cols.names) * len(ids.ids)
            # idempotence
            assert filter_columns(a, cols) == a
            assert filter_rows(a, ids) == a


class TestPipeEncoding:
    def test_appendix_sample_bytes(self, exeter_table):
        assert encode_pipe(exeter_table) == EXETER_B2

    def test_zero_rows(self):
        t = make_table(["a", "b"], [])
        assert encode_pipe(t) == "/\ncol : a | b\n*/\ncolumns: ['a', 'b']"

    def test_empty_cell_field(self):
        t = make_table(["a", "b"], [["", "3"]])
        assert "row 1:  | 3" in encode_pipe(t)
        assert parse_pipe(encode_pipe(t)).rendered_grid() == t.rendered_grid()

    def test_round_trip_random(self):
        rng = random.Random(23)
        for _ in range(300):
            t = random_table(rng)
            back = parse_pipe(encode_pipe(t))
            assert back.columns == t.columns
            assert back.row_ids == t.row_ids
            assert back.rendered_grid() == t.rendered_grid()
            assert back.caption == t.caption


class TestSqlSchemaEncoding:
    def test_appendix_sample_bytes(self, exeter_table):
        assert encode_sql_schema(exeter_table, 10_000) == EXETER_B1

    def test_degenerate_budget_keeps_header_only(self, exeter_table):
        text, kept = sql_schema_encoding(exeter_table, 1)
        assert kept == 0
        assert "danny coles" not in text
        assert "SELECT * FROM w;" in text
        assert text.endswith("columns: ['name', 'league', 'total']")

    def test_mixed_column_is_text(self):
        t = make_table(["v"], [["3"], ["n/a"]])
        assert "\tv text)" in encode_sql_schema(t, 10_000)

    def test_real_column(self):
        t = make_table(["v"], [["3.5"], ["2"]])
        assert "\tv real)" in encode_sql_schema(t, 10_000)

    def test_all_empty_column_is_text(self):
        t = make_table(["v"], [[""], [""]])
        assert "\tv text)" in encode_sql_schema(t, 10_000)

    def test_truncation_monotone(self):
        rng = random.Random(5)
        for _ in range(50):
            t = random_table(rng, max_cols=4, max_rows=6)
            kept = [sql_schema_encoding(t, budget)[1] for budget in range(0, 200, 7)]
            assert kept == sorted(kept)
            assert kept[-1] <= len(t.rows)


class TestCounts:
    def test_cell_count(self):
        assert cell_count(make_table(["a", "b"], [["1", "2"], ["3", "4"]])) == 4
        assert cell_count(make_table(["a"], [])) == 0

    def test_token_estimate(self):
        assert token_estimate("") == 0
        assert token_estimate("a b c") == 3
        assert token_estimate("x" * 9) == 2
        assert token_estimate("x" * 8) == 1

    def test_token_estimate_regression_on_sample(self, exeter_table):
        # frozen once from the implemented rule
        assert token_estimate(EXETER_B2) == 45
        assert token_estimate(encode_pipe(exeter_table)) == 45
