"""Adaptive answer generation over the extracted table.

Quantitative questions get a SQL evidence pass whose result is injected into
the final text prompt; everything else goes straight to text. Text always
produces the final answer in adaptive mode. The sql_only and text_only modes
wire the corresponding single-strategy ablations.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .extraction import EXEC_FAILURE, OK, PARSE_FAILURE
from .gateway import GatewayError, LlmClient, LlmExchange, SamplingParams
from .prompting import (
    build_math_classify_prompt,
    build_reason_sql_prompt,
    build_reason_text_prompt,
    render_evidence_slot,
    render_result_block,
    scan_answer,
    scan_sql,
    scan_yes_no,
)
from .sql import BindError, ParseError, ResultSet, execute, parse_query
from .table import Table

log = logging.getLogger(__name__)

REASONING_MODES = ("adaptive", "text_only", "sql_only")

ENTAILED = "entailed"
REFUTED = "refuted"

_LABEL_MAP = {
    "yes": ENTAILED, "true": ENTAILED, "entailed": ENTAILED, "1": ENTAILED,
    "no": REFUTED, "false": REFUTED, "refuted": REFUTED, "0": REFUTED,
}

DEFAULT_MATH_KEYWORDS = (
    "how many", "total", "sum", "average", "difference", "most", "least",
    "longest", "shortest", "count", "more than", "fewer", "combined",
    "how long", "how much",
)


@dataclass
class Evidence:
    query_text: str | None
    result_block: str | None
    outcome: str

    def to_dict(self) -> dict:
        return {
            "query_text": self.query_text,
            "result_block": self.result_block,
            "outcome": self.outcome,
        }


@dataclass
class Answer:
    text: str
    label: str | None = None
    abstained: bool = False
    raw_completions: list[str] = field(default_factory=list)
    note: str | None = None

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "label": self.label,
            "abstained": self.abstained,
            "raw_completions": self.raw_completions,
            "note": self.note,
        }


@dataclass
class ReasoningResult:
    answer: Answer
    evidence: Evidence | None
    math_fired: bool
    exchanges: list[LlmExchange] = field(default_factory=list)


def _normalize_label_token(payload: str) -> str:
    return payload.strip().strip(".").strip("'\"").strip().lower()


def label_for(payload: str) -> str | None:
    return _LABEL_MAP.get(_normalize_label_token(payload))


class Reasoner:
    def __init__(self, client: LlmClient, profile, table_token_budget: int = 4000,
                 template_dir=None):
        self.client = client
        self.profile = profile
        self.table_token_budget = table_token_budget
        self.template_dir = template_dir

    def classify_math(self, question: str) -> tuple[bool, LlmExchange | None]:
        """One zero-temperature YES/NO call; keyword fallback keeps this total."""
        if self.profile.use_llm_classifier:
            prompt = build_math_classify_prompt(question, self.template_dir)
            params = self.profile.params.get(
                "math_classify",
                SamplingParams(temperature=0.0, top_p=1.0, max_output_tokens=8, n_samples=1),
            )
            try:
                exchange = self.client.complete("math_classify", prompt, params)
            except GatewayError as exc:
                log.warning("math classifier call failed (%s); using keyword fallback", exc)
            else:
                verdict = scan_yes_no(exchange.completions[0])
                if verdict is not None:
                    return verdict, exchange
                log.warning("math classifier returned no YES/NO; using keyword fallback")
                return self._keyword_math(question), exchange
        return self._keyword_math(question), None

    def _keyword_math(self, question: str) -> bool:
        q = question.lower()
        return any(k in q for k in self.profile.math_keywords)

    def sql_evidence(self, t_cr: Table, question: str) -> tuple[Evidence, ResultSet | None, LlmExchange]:
        """Generate and execute an evidence query; failures degrade, never raise."""
        prompt, _ = build_reason_sql_prompt(
            t_cr, question, self.table_token_budget, self.template_dir
        )
        exchange = self.client.complete("reason_sql", prompt, self.profile.params["reason_sql"])
        saw_exec = False
        last_sql = None
        for completion in exchange.completions:
            sql = scan_sql(completion)
            if sql is None:
                continue
            last_sql = sql
            try:
                result = execute(parse_query(sql), t_cr)
            except ParseError:
                continue
            except BindError:
                saw_exec = True
                continue
            evidence = Evidence(sql, render_result_block(result), OK)
            return evidence, result, exchange
        outcome = EXEC_FAILURE if saw_exec else PARSE_FAILURE
        return Evidence(last_sql, None, outcome), None, exchange

    def text_answer(self, t_cr: Table, question: str, result: ResultSet | None,
                    task: str) -> tuple[Answer, LlmExchange]:
        """Final textual answer; first parseable sample wins."""
        prompt = build_reason_text_prompt(
            t_cr, question, task, render_evidence_slot(result), self.template_dir
        )
        exchange = self.client.complete("reason_text", prompt, self.profile.params["reason_text"])
        payloads = [scan_answer(c) for c in exchange.completions]
        parseable = [p for p in payloads if p is not None]
        if not parseable:
            return (
                Answer("", abstained=True, raw_completions=list(exchange.completions)),
                exchange,
            )
        chosen = parseable[0]
        note = None
        if len(set(parseable)) > 1:
            note = f"samples disagreed ({parseable!r}); kept the first"
        answer = Answer(chosen, raw_completions=list(exchange.completions), note=note)
        if task == "fact_verification":
            label = label_for(chosen)
            if label is None:
                answer.abstained = True
            answer.label = label
        return answer, exchange

    def reason(self, t_cr: Table, question: str, task: str,
               mode: str = "adaptive") -> ReasoningResult:
        if mode not in REASONING_MODES:
            raise ValueError(f"unknown reasoning mode {mode!r}; valid: {list(REASONING_MODES)}")
        exchanges: list[LlmExchange] = []

        if mode == "text_only":
            answer, exchange = self.text_answer(t_cr, question, None, task)
            return ReasoningResult(answer, None, False, [exchange])

        if mode == "sql_only":
            evidence, result, exchange = self.sql_evidence(t_cr, question)
            exchanges.append(exchange)
            answer = self._answer_from_result(evidence, result, task)
            return ReasoningResult(answer, evidence, False, exchanges)

        # adaptive
        is_math, classify_exchange = self.classify_math(question)
        if classify_exchange is not None:
            exchanges.append(classify_exchange)
        evidence = None
        result = None
        if is_math:
            evidence, result, exchange = self.sql_evidence(t_cr, question)
            exchanges.append(exchange)
        answer, exchange = self.text_answer(t_cr, question, result, task)
        exchanges.append(exchange)
        return ReasoningResult(answer, evidence, is_math, exchanges)

    def _answer_from_result(self, evidence: Evidence, result: ResultSet | None,
                            task: str) -> Answer:
        raw = [evidence.query_text] if evidence.query_text else []
        if result is None or not result.rows or not result.rows[0].values:
            return Answer("", abstained=True, raw_completions=raw)
        first = result.rows[0].values[0].render()
        if not first:
            return Answer("", abstained=True, raw_completions=raw)
        answer = Answer(first, raw_completions=raw)
        if task == "fact_verification":
            label = label_for(first)
            if label is None:
                answer.abstained = True
            answer.label = label
        return answer
