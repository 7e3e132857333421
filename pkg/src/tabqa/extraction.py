"""Question-specific table extraction: a two-step multi-view chain.

Columns are selected first (SQL generation over the original table, then a
text check over the transposed view), rows second (SQL over the column-filtered
table, then a text check). SQL and text selections are unioned; an empty union
falls back to keeping everything, so extraction never discards a whole axis.

Model-output problems (unparseable SQL, hallucinated names) are recoverable
stage outcomes, never exceptions. Gateway failures (transport, missing replay
fixture) do propagate: the caller aborts the example.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .gateway import LlmClient, LlmExchange
from .prompting import (
    build_col_sql_prompt,
    build_col_text_prompt,
    build_row_sql_prompt,
    build_row_text_prompt,
    scan_columns_line,
    scan_rows_line,
    scan_sql,
)
from .sql import BindError, ParseError, execute, parse_query, referenced_columns, result_row_ids
from .table import ColumnSet, RowIdSet, Table, cell_count, filter_columns, filter_rows, transpose

log = logging.getLogger(__name__)

OK = "ok"
PARSE_FAILURE = "parse_failure"
EXEC_FAILURE = "exec_failure"
EMPTY_FALLBACK = "empty_fallback"
SKIPPED = "skipped"

EXTRACTION_MODES = ("full", "no_column", "no_row", "none")


@dataclass
class StageOut:
    """Result of one LLM-driven extraction stage."""

    selected: list
    outcome: str
    exchange: LlmExchange
    notes: list[str] = field(default_factory=list)


@dataclass
class ExtractionTrace:
    question: str
    mode: str
    c1: list[str] = field(default_factory=list)
    c2: list[str] = field(default_factory=list)
    c_final: list[str] = field(default_factory=list)
    r1: list[int] = field(default_factory=list)
    r2: list[int] = field(default_factory=list)
    r_final: list[int] = field(default_factory=list)
    outcomes: dict[str, str] = field(default_factory=dict)
    cell_counts: dict[str, int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    exchanges: list[LlmExchange] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "mode": self.mode,
            "c1": self.c1,
            "c2": self.c2,
            "c_final": self.c_final,
            "r1": self.r1,
            "r2": self.r2,
            "r_final": self.r_final,
            "outcomes": self.outcomes,
            "cell_counts": self.cell_counts,
            "notes": self.notes,
        }

    def absorb(self, stage: str, out: StageOut) -> list:
        self.outcomes[stage] = out.outcome
        self.exchanges.append(out.exchange)
        self.notes.extend(out.notes)
        return out.selected


def _failure_outcome(saw_exec_failure: bool) -> str:
    return EXEC_FAILURE if saw_exec_failure else PARSE_FAILURE


class Extractor:
    """Runs the extraction chain for one table/question pair."""

    def __init__(self, client: LlmClient, profile, table_token_budget: int = 4000,
                 template_dir=None):
        self.client = client
        self.profile = profile
        self.table_token_budget = table_token_budget
        self.template_dir = template_dir

    def col_sql(self, t: Table, question: str) -> StageOut:
        """Columns referenced by generated SQL over the original table."""
        prompt, kept = build_col_sql_prompt(
            t, question, self.table_token_budget, self.template_dir
        )
        exchange = self.client.complete("col_sql", prompt, self.profile.params["col_sql"])
        names: dict[str, None] = {}
        any_ok = False
        saw_exec = False
        for completion in exchange.completions:
            sql = scan_sql(completion)
            if sql is None:
                continue
            try:
                cols = referenced_columns(parse_query(sql), t)
            except ParseError:
                continue
            except BindError:
                saw_exec = True
                continue
            any_ok = True
            for name in cols.names:
                names[name] = None
        outcome = OK if any_ok else _failure_outcome(saw_exec)
        return StageOut(list(names), outcome, exchange,
                        _truncation_notes("col_sql", t, kept))

    def col_text(self, t_transposed: Table, question: str, c1: list[str]) -> StageOut:
        """Text verification over the transposed view, matched against original columns."""
        original_columns = [row.cells[0].render() for row in t_transposed.rows]
        by_fold = {c.casefold(): c for c in original_columns}
        prompt = build_col_text_prompt(t_transposed, question, list(c1), self.template_dir)
        exchange = self.client.complete("col_text", prompt, self.profile.params["col_text"])
        names: dict[str, None] = {}
        dropped: list[str] = []
        any_ok = False
        for completion in exchange.completions:
            listed = scan_columns_line(completion)
            if listed is None:
                continue
            any_ok = True
            for raw in listed:
                canonical = by_fold.get(raw.strip().casefold())
                if canonical is None:
                    dropped.append(raw)
                    log.warning("col_text proposed unknown column %r; dropped", raw)
                else:
                    names[canonical] = None
        notes = [f"col_text dropped invalid columns: {dropped!r}"] if dropped else []
        return StageOut(list(names), OK if any_ok else PARSE_FAILURE, exchange, notes)

    def row_sql(self, t_c: Table, question: str) -> StageOut:
        """Row ids surviving generated SQL executed on the column-filtered table."""
        prompt, kept = build_row_sql_prompt(
            t_c, question, self.table_token_budget, self.template_dir
        )
        exchange = self.client.complete("row_sql", prompt, self.profile.params["row_sql"])
        ids: set[int] = set()
        any_ok = False
        saw_exec = False
        for completion in exchange.completions:
            sql = scan_sql(completion)
            if sql is None:
                continue
            try:
                result = execute(parse_query(sql), t_c)
            except ParseError:
                continue
            except BindError:
                saw_exec = True
                continue
            any_ok = True
            ids.update(result_row_ids(result).ids)
        outcome = OK if any_ok else _failure_outcome(saw_exec)
        return StageOut(sorted(ids), outcome, exchange,
                        _truncation_notes("row_sql", t_c, kept))

    def row_text(self, t_c: Table, question: str, r1: list[int]) -> StageOut:
        """Text verification of the row selection."""
        valid = set(t_c.row_ids)
        prompt = build_row_text_prompt(t_c, question, list(r1), self.template_dir)
        exchange = self.client.complete("row_text", prompt, self.profile.params["row_text"])
        ids: set[int] = set()
        dropped: list[int] = []
        any_ok = False
        for completion in exchange.completions:
            listed = scan_rows_line(completion)
            if listed is None:
                continue
            any_ok = True
            for rid in listed:
                if rid in valid:
                    ids.add(rid)
                else:
                    dropped.append(rid)
                    log.warning("row_text proposed unknown row id %r; dropped", rid)
        notes = [f"row_text dropped invalid row ids: {dropped!r}"] if dropped else []
        return StageOut(sorted(ids), OK if any_ok else PARSE_FAILURE, exchange, notes)

    def extract(self, t: Table, question: str, mode: str = "full") -> tuple[Table, ExtractionTrace]:
        if mode not in EXTRACTION_MODES:
            raise ValueError(f"unknown extraction mode {mode!r}; valid: {list(EXTRACTION_MODES)}")
        trace = ExtractionTrace(question=question, mode=mode)
        trace.cell_counts["t"] = cell_count(t)

        skip_columns = mode in ("no_column", "none")
        skip_rows = mode in ("no_row", "none")

        if skip_columns:
            trace.outcomes["col_sql"] = SKIPPED
            trace.outcomes["col_text"] = SKIPPED
            trace.outcomes["columns"] = SKIPPED
            trace.c_final = list(t.columns)
            t_c = t
        else:
            trace.c1 = trace.absorb("col_sql", self.col_sql(t, question))
            trace.c2 = trace.absorb(
                "col_text", self.col_text(transpose(t), question, trace.c1)
            )
            union = [c for c in t.columns if c in set(trace.c1) | set(trace.c2)]
            if union:
                trace.outcomes["columns"] = OK
            else:
                union = list(t.columns)
                trace.outcomes["columns"] = EMPTY_FALLBACK
            trace.c_final = union
            t_c = filter_columns(t, ColumnSet(tuple(union)))
        trace.cell_counts["t_c"] = cell_count(t_c)

        if skip_rows:
            trace.outcomes["row_sql"] = SKIPPED
            trace.outcomes["row_text"] = SKIPPED
            trace.outcomes["rows"] = SKIPPED
            trace.r_final = list(t_c.row_ids)
            t_cr = t_c
        else:
            trace.r1 = trace.absorb("row_sql", self.row_sql(t_c, question))
            trace.r2 = trace.absorb(
                "row_text", self.row_text(t_c, question, trace.r1)
            )
            union_ids = sorted(set(trace.r1) | set(trace.r2))
            if union_ids:
                trace.outcomes["rows"] = OK
            else:
                union_ids = list(t_c.row_ids)
                trace.outcomes["rows"] = EMPTY_FALLBACK
            trace.r_final = union_ids
            t_cr = filter_rows(t_c, RowIdSet(tuple(union_ids))) if union_ids else t_c
        trace.cell_counts["t_cr"] = cell_count(t_cr)
        return t_cr, trace


def _truncation_notes(stage: str, t: Table, kept: int) -> list[str]:
    if kept < len(t.rows):
        return [f"{stage} prompt truncated table to {kept} of {len(t.rows)} rows"]
    return []
