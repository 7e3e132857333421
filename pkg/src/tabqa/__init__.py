"""Hybrid SQL/text table question answering.

Two-stage pipeline: multi-view question-specific table extraction (SQL plus
text verification over the original and transposed views), then adaptive
reasoning that adds SQL-computed evidence for quantitative questions before a
final textual answer. Includes a deterministic record/replay LLM gateway and
an evaluation harness for fact verification and short/long-form table QA.
"""
from .config import PROFILES, Profile, RunConfig
from .dataset import ExampleRecord, load_dataset
from .extraction import ExtractionTrace, Extractor
from .gateway import (
    FixtureStore,
    LiveBackend,
    LlmClient,
    LlmExchange,
    RecordBackend,
    ReplayBackend,
    SamplingParams,
    exchange_digest,
    generation_budget,
)
from .metrics import bucket, exact_match, rouge_l, rouge_n
from .reasoning import Answer, Evidence, Reasoner, ReasoningResult
from .runner import EvalRecord, build_report, report_from_traces, run
from .sql import execute, parse_query, referenced_columns, result_row_ids
from .table import (
    CellValue,
    ColumnSet,
    Row,
    RowIdSet,
    Table,
    cell_count,
    encode_pipe,
    encode_sql_schema,
    filter_columns,
    filter_rows,
    load_table,
    parse_pipe,
    token_estimate,
    transpose,
)

__version__ = "0.1.0"
