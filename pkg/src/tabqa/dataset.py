"""Dataset ingestion: neutral JSONL schema plus thin benchmark adapters.

Neutral schema, one JSON object per line:

    {"id": str, "task": "fact_verification"|"short_qa"|"long_qa",
     "table": {"caption"?: str, "header": [str], "rows": [[str]]},
     "question": str, "gold": str}

Adapters map benchmark-flavored records onto the same shape:

    tabfact: {"statement", "label": 1|0, "table": {...}}         -> fact_verification
    wikitq:  {"question", "answers": [..] or "answer", "table"}  -> short_qa
    fetaqa:  {"question", "answer", "table": {...}}              -> long_qa

Malformed lines are collected as rejects (the run continues); more than half
rejected aborts the load.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .prompting import TASKS

ADAPTERS = ("neutral", "tabfact", "wikitq", "fetaqa")

FACT_LABELS = ("entailed", "refuted")


class DatasetError(Exception):
    pass


@dataclass
class ExampleRecord:
    id: str
    task: str
    table: dict
    question: str
    gold: str
    metadata: dict = field(default_factory=dict)


@dataclass
class Reject:
    line_no: int
    reason: str
    raw: str


def _require(record: dict, key: str):
    if key not in record:
        raise ValueError(f"missing {key!r}")
    return record[key]


def _check_table(table) -> dict:
    if not isinstance(table, dict):
        raise ValueError("'table' must be an object")
    header = table.get("header")
    if not isinstance(header, list) or not header:
        raise ValueError("'table.header' must be a non-empty list")
    rows = table.get("rows")
    if not isinstance(rows, list):
        raise ValueError("'table.rows' must be a list")
    for i, row in enumerate(rows, start=1):
        if not isinstance(row, list) or len(row) != len(header):
            raise ValueError(f"'table.rows[{i}]' is not a {len(header)}-cell list")
    return table


def _from_neutral(record: dict, line_no: int) -> ExampleRecord:
    task = _require(record, "task")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    gold = _require(record, "gold")
    if task == "fact_verification" and gold not in FACT_LABELS:
        raise ValueError(f"fact_verification gold must be one of {FACT_LABELS}, got {gold!r}")
    return ExampleRecord(
        id=str(record.get("id", f"line-{line_no}")),
        task=task,
        table=_check_table(_require(record, "table")),
        question=str(_require(record, "question")),
        gold=str(gold),
        metadata=record.get("metadata", {}),
    )


def _from_tabfact(record: dict, line_no: int) -> ExampleRecord:
    label = _require(record, "label")
    if label not in (0, 1, "0", "1"):
        raise ValueError(f"tabfact label must be 0 or 1, got {label!r}")
    return ExampleRecord(
        id=str(record.get("id", f"tabfact-{line_no}")),
        task="fact_verification",
        table=_check_table(_require(record, "table")),
        question=str(_require(record, "statement")),
        gold="entailed" if int(label) == 1 else "refuted",
        metadata=record.get("metadata", {}),
    )


def _from_wikitq(record: dict, line_no: int) -> ExampleRecord:
    if "answers" in record:
        answers = record["answers"]
        if not isinstance(answers, list) or not answers:
            raise ValueError("'answers' must be a non-empty list")
        gold = "|".join(str(a) for a in answers)
    else:
        gold = str(_require(record, "answer"))
    return ExampleRecord(
        id=str(record.get("id", f"wikitq-{line_no}")),
        task="short_qa",
        table=_check_table(_require(record, "table")),
        question=str(_require(record, "question")),
        gold=gold,
        metadata=record.get("metadata", {}),
    )


def _from_fetaqa(record: dict, line_no: int) -> ExampleRecord:
    return ExampleRecord(
        id=str(record.get("id", f"fetaqa-{line_no}")),
        task="long_qa",
        table=_check_table(_require(record, "table")),
        question=str(_require(record, "question")),
        gold=str(_require(record, "answer")),
        metadata=record.get("metadata", {}),
    )


_ADAPTER_FUNCS = {
    "neutral": _from_neutral,
    "tabfact": _from_tabfact,
    "wikitq": _from_wikitq,
    "fetaqa": _from_fetaqa,
}


def load_dataset(
    path: str | Path, adapter: str = "neutral"
) -> tuple[list[ExampleRecord], list[Reject]]:
    """Read a JSONL dataset; returns (records, rejects)."""
    if adapter not in _ADAPTER_FUNCS:
        raise DatasetError(f"unknown adapter {adapter!r}; valid: {list(ADAPTERS)}")
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    convert = _ADAPTER_FUNCS[adapter]
    records: list[ExampleRecord] = []
    rejects: list[Reject] = []
    seen_ids: set[str] = set()
    considered = 0
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            considered += 1
            try:
                raw = json.loads(line)
                if not isinstance(raw, dict):
                    raise ValueError("line is not a JSON object")
                record = convert(raw, line_no)
                if record.id in seen_ids:
                    raise ValueError(f"duplicate id {record.id!r}")
            except (ValueError, TypeError) as exc:
                rejects.append(Reject(line_no, str(exc), line.rstrip("\n")))
                continue
            seen_ids.add(record.id)
            records.append(record)
    if considered and len(rejects) * 2 > considered:
        raise DatasetError(
            f"{len(rejects)} of {considered} lines rejected; aborting "
            f"(first: line {rejects[0].line_no}: {rejects[0].reason})"
        )
    return records, rejects


def write_rejects(rejects: list[Reject], path: str | Path) -> None:
    if not rejects:
        return
    with open(path, "w", encoding="utf-8") as f:
        for r in rejects:
            f.write(json.dumps(
                {"line_no": r.line_no, "reason": r.reason, "raw": r.raw},
                ensure_ascii=False,
            ))
            f.write("\n")
