"""Prompt assembly from template files, and scanners for model completions.

Templates are data: plain UTF-8 files with literal slot markers ({table},
{question}, {prior_selection}, {few_shots}, {evidence}). Slots are replaced
literally, so template and few-shot text may contain braces freely. A custom
template directory overrides the packaged defaults file by file.
"""
from __future__ import annotations

import ast as pyast
import re
from importlib import resources
from pathlib import Path

from .sql.ast import ResultSet
from .table import Table, encode_pipe, sql_schema_encoding

TASKS = ("fact_verification", "short_qa", "long_qa")


def _read_packaged(kind: str, name: str) -> str | None:
    ref = resources.files("tabqa") / kind / f"{name}.txt"
    if not ref.is_file():
        return None
    return ref.read_text(encoding="utf-8")


def load_template(name: str, template_dir: str | Path | None = None) -> str:
    if template_dir is not None:
        custom = Path(template_dir) / f"{name}.txt"
        if custom.exists():
            return custom.read_text(encoding="utf-8")
    text = _read_packaged("templates", name)
    if text is None:
        raise FileNotFoundError(f"no template named {name!r}")
    return text


def load_few_shots(name: str, template_dir: str | Path | None = None) -> str:
    if template_dir is not None:
        custom = Path(template_dir) / "fewshots" / f"{name}.txt"
        if custom.exists():
            return custom.read_text(encoding="utf-8")
    return _read_packaged("fewshots", name) or ""


def render_slots(template: str, **slots: str) -> str:
    out = template
    for key, value in slots.items():
        out = out.replace("{" + key + "}", value)
    return out


def _few_shots_slot(name: str, template_dir) -> str:
    text = load_few_shots(name, template_dir)
    return text.rstrip() + "\n\n" if text.strip() else ""


def build_col_sql_prompt(
    t: Table, question: str, token_budget: int, template_dir=None
) -> tuple[str, int]:
    """Returns (prompt, data rows kept after truncation)."""
    encoded, kept = sql_schema_encoding(t, token_budget)
    prompt = render_slots(
        load_template("col_sql", template_dir),
        few_shots=_few_shots_slot("col_sql", template_dir),
        table=encoded,
        question=question,
    )
    return prompt, kept


def build_col_text_prompt(
    t_transposed: Table, question: str, prior: list[str], template_dir=None
) -> str:
    return render_slots(
        load_template("col_text", template_dir),
        few_shots=_few_shots_slot("col_text", template_dir),
        table=encode_pipe(t_transposed),
        question=question,
        prior_selection=f"columns: {prior!r}",
    )


def build_row_sql_prompt(
    t_c: Table, question: str, token_budget: int, template_dir=None
) -> tuple[str, int]:
    encoded, kept = sql_schema_encoding(t_c, token_budget)
    prompt = render_slots(
        load_template("row_sql", template_dir),
        few_shots=_few_shots_slot("row_sql", template_dir),
        table=encoded,
        question=question,
    )
    return prompt, kept


def build_row_text_prompt(
    t_c: Table, question: str, prior: list[int], template_dir=None
) -> str:
    return render_slots(
        load_template("row_text", template_dir),
        few_shots=_few_shots_slot("row_text", template_dir),
        table=encode_pipe(t_c),
        question=question,
        prior_selection=f"rows: {prior!r}",
    )


def build_math_classify_prompt(question: str, template_dir=None) -> str:
    return render_slots(
        load_template("math_classify", template_dir), question=question
    )


def build_reason_sql_prompt(
    t_cr: Table, question: str, token_budget: int, template_dir=None
) -> tuple[str, int]:
    encoded, kept = sql_schema_encoding(t_cr, token_budget)
    prompt = render_slots(
        load_template("reason_sql", template_dir),
        few_shots=_few_shots_slot("reason_sql", template_dir),
        table=encoded,
        question=question,
    )
    return prompt, kept


def build_reason_text_prompt(
    t_cr: Table, question: str, task: str, evidence_block: str, template_dir=None
) -> str:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; valid tasks: {list(TASKS)}")
    name = f"reason_text_{task}"
    return render_slots(
        load_template(name, template_dir),
        few_shots=_few_shots_slot(name, template_dir),
        table=encode_pipe(t_cr),
        question=question,
        evidence=evidence_block,
    )


def render_result_block(rs: ResultSet) -> str:
    """Small PIPE rendering of a query result (rows renumbered positionally)."""
    lines = ["col : " + " | ".join(rs.columns)]
    for i, row in enumerate(rs.rows, start=1):
        lines.append(f"row {i}: " + " | ".join(v.render() for v in row.values))
    return "\n".join(lines)


def render_evidence_slot(rs: ResultSet | None) -> str:
    if rs is None:
        return ""
    return f"SQL evidence:\n{render_result_block(rs)}\n\n"


# --- completion scanners ---

_FENCE_RE = re.compile(r"```(?:[a-zA-Z]+\n)?(.*?)```", re.DOTALL)


def scan_sql(completion: str) -> str | None:
    """Pull one SQL statement out of a completion.

    The first fenced code block wins (taken whole, so fenced statements may
    span lines); otherwise the first line beginning with SELECT, after
    stripping an `SQL:` tag.
    """
    m = _FENCE_RE.search(completion)
    if m:
        text = m.group(1).strip()
        if text.upper().startswith("SQL:"):
            text = text[4:].strip()
        return text if text.upper().startswith("SELECT") else None
    for line in completion.split("\n"):
        candidate = line.strip()
        if candidate.upper().startswith("SQL:"):
            candidate = candidate[4:].strip()
        if candidate.upper().startswith("SELECT"):
            return candidate
    return None


def _scan_bracket_line(completion: str, label: str) -> list | None:
    pattern = re.compile(rf"^\s*{label}\s*:\s*(\[.*\])\s*$", re.IGNORECASE)
    found = None
    for line in completion.split("\n"):
        m = pattern.match(line)
        if m:
            found = m.group(1)
    if found is None:
        return None
    try:
        value = pyast.literal_eval(found)
        if isinstance(value, (list, tuple)):
            return list(value)
    except (ValueError, SyntaxError):
        pass
    # tolerate sloppy quoting: fall back to quoted-item extraction
    items = re.findall(r"'([^']*)'|\"([^\"]*)\"", found)
    if items:
        return [a if a else b for a, b in items]
    inner = found[1:-1].strip()
    return [] if not inner else None


def scan_columns_line(completion: str) -> list[str] | None:
    """Last `columns: [...]` line of a completion, as a list of names."""
    value = _scan_bracket_line(completion, "columns")
    if value is None:
        return None
    return [str(v) for v in value]


def scan_rows_line(completion: str) -> list[int] | None:
    """Last `rows: [...]` line of a completion, as a list of row ids."""
    value = _scan_bracket_line(completion, "rows")
    if value is None:
        return None
    ids = []
    for item in value:
        if isinstance(item, bool):
            continue
        if isinstance(item, int):
            ids.append(item)
            continue
        m = re.search(r"\d+", str(item))
        if m:
            ids.append(int(m.group()))
    return ids


_ANSWER_RE = re.compile(r"^\s*answer\s*:\s*(.*?)\s*$", re.IGNORECASE)


def scan_answer(completion: str) -> str | None:
    """Payload of the last `Answer:` line; None when absent or empty."""
    payload = None
    for line in completion.split("\n"):
        m = _ANSWER_RE.match(line)
        if m:
            payload = m.group(1)
    if payload:
        return payload
    return None


_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def scan_yes_no(completion: str) -> bool | None:
    m = _YES_NO_RE.search(completion)
    if m is None:
        return None
    return m.group(1).lower() == "yes"
