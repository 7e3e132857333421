"""Batch execution: run every example, persist traces, aggregate a report.

Trace files are canonical and deterministic (no timestamps, no host paths), so
a recorded run and its replay produce byte-identical traces and report. The
report stores nothing that cannot be recomputed from the trace directory.
"""
from __future__ import annotations

import json
import logging
import random
import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter

from .config import ConfigError, RunConfig
from .dataset import ExampleRecord, load_dataset, write_rejects
from .extraction import ExtractionTrace, Extractor
from .gateway import (
    FixtureStore,
    LiveBackend,
    LlmClient,
    LlmExchange,
    RecordBackend,
    ReplayBackend,
    generation_budget,
)
from .metrics import bucket, exact_match, rouge_l, rouge_n
from .reasoning import Answer, Evidence, Reasoner
from .table import encode_pipe, load_table, token_estimate

log = logging.getLogger(__name__)

REPORT_META = {
    "rouge_variant": "F-measure, beta=1, stemmerless, multiset n-grams",
    "token_estimator": "deterministic whitespace-run proxy (no model tokenizer)",
}


@dataclass
class EvalRecord:
    id: str
    task: str
    question: str
    gold: str
    answer: Answer | None = None
    evidence: Evidence | None = None
    trace: ExtractionTrace | None = None
    exchanges: list[LlmExchange] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)
    token_estimate: int = 0
    bucket: str = "small"
    generation_budget: int = 0
    classifier_samples: int = 0
    math_fired: bool = False
    wall_time: float = 0.0  # in-memory only; never serialized
    error: str | None = None

    def to_trace_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.task,
            "question": self.question,
            "gold": self.gold,
            "token_estimate": self.token_estimate,
            "bucket": self.bucket,
            "extraction": self.trace.to_dict() if self.trace else None,
            "evidence": self.evidence.to_dict() if self.evidence else None,
            "answer": self.answer.to_dict() if self.answer else None,
            "math_fired": self.math_fired,
            "metrics": self.metrics,
            "generation_budget": self.generation_budget,
            "classifier_samples": self.classifier_samples,
            "exchanges": [e.to_dict() for e in self.exchanges],
            "error": self.error,
        }


def build_client(cfg: RunConfig) -> LlmClient:
    import os

    if cfg.backend == "replay":
        backend = ReplayBackend(FixtureStore(cfg.fixtures_dir))
    else:
        live = LiveBackend(
            endpoint=cfg.endpoint,
            model=cfg.model,
            api_key=os.environ.get(cfg.api_key_env),
        )
        if cfg.backend == "record":
            backend = RecordBackend(live, FixtureStore(cfg.fixtures_dir))
        else:
            backend = live
    return LlmClient(backend, max_in_flight=cfg.concurrency)


def score_answer(task: str, answer: Answer, gold: str) -> dict[str, float]:
    if task == "fact_verification":
        return {"correct": 1.0 if answer.label == gold else 0.0}
    if task == "short_qa":
        hit = not answer.abstained and exact_match(answer.text, gold)
        return {"exact_match": 1.0 if hit else 0.0}
    out: dict[str, float] = {}
    for name, values in (
        ("rouge1", rouge_n(answer.text, gold, 1)),
        ("rouge2", rouge_n(answer.text, gold, 2)),
        ("rougeL", rouge_l(answer.text, gold)),
    ):
        p, r, f1 = values
        out[f"{name}_precision"] = p
        out[f"{name}_recall"] = r
        out[f"{name}_f1"] = f1
    return out


def primary_metric(task: str) -> str:
    return {
        "fact_verification": "correct",
        "short_qa": "exact_match",
        "long_qa": "rougeL_f1",
    }[task]


def run_example(example: ExampleRecord, extractor: Extractor, reasoner: Reasoner,
                cfg: RunConfig) -> EvalRecord:
    record = EvalRecord(example.id, example.task, example.question, example.gold)
    started = perf_counter()
    try:
        table = load_table(example.table)
        record.token_estimate = token_estimate(encode_pipe(table))
        record.bucket = bucket(
            record.token_estimate, cfg.small_token_limit, cfg.large_token_limit
        )
        t_cr, trace = extractor.extract(table, example.question, cfg.extraction_mode)
        record.trace = trace
        result = reasoner.reason(t_cr, example.question, example.task, cfg.reasoning_mode)
        record.answer = result.answer
        record.evidence = result.evidence
        record.math_fired = result.math_fired
        record.exchanges = list(trace.exchanges) + list(result.exchanges)
        record.generation_budget = generation_budget(record.exchanges)
        record.classifier_samples = sum(
            e.params.n_samples for e in record.exchanges if e.stage == "math_classify"
        )
        record.metrics = score_answer(example.task, result.answer, example.gold)
    except Exception as exc:
        log.error("example %s failed: %s", example.id, exc)
        record.error = f"{type(exc).__name__}: {exc}"
    record.wall_time = perf_counter() - started
    return record


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def tabfact_accuracy(records: list) -> float:
    """Fraction of fact-verification records with the correct label; abstentions count wrong."""
    scored = [r for r in records if _view(r)["task"] == "fact_verification" and not _view(r)["error"]]
    if not scored:
        raise ValueError("no records")
    return _mean([_view(r)["metrics"].get("correct", 0.0) for r in scored])


def cell_reduction_stats(records: list) -> tuple[float, float, float]:
    """Average cell counts of the original, column-filtered, and final tables."""
    counts = [
        _view(r)["extraction"]["cell_counts"]
        for r in records
        if _view(r)["extraction"] is not None
    ]
    if not counts:
        raise ValueError("no records")
    return (
        _mean([c["t"] for c in counts]),
        _mean([c["t_c"] for c in counts]),
        _mean([c["t_cr"] for c in counts]),
    )


def _view(record) -> dict:
    """Uniform dict view over EvalRecord objects and trace-file dicts."""
    if isinstance(record, dict):
        return record
    return record.to_trace_dict()


def build_report(records: list, cfg_echo: dict | None = None) -> dict:
    """Aggregate metrics; deterministic given the same set of records."""
    views = sorted((_view(r) for r in records), key=lambda v: v["id"])
    per_task: dict[str, dict] = {}
    for task in sorted({v["task"] for v in views}):
        task_views = [v for v in views if v["task"] == task and not v["error"]]
        entry: dict = {"count": len(task_views)}
        if task_views:
            metric_names = sorted(task_views[0]["metrics"])
            for name in metric_names:
                entry[name] = _mean([v["metrics"][name] for v in task_views])
        per_task[task] = entry

    per_bucket: dict[str, dict] = {}
    for name in ("small", "medium", "large"):
        bucket_views = [v for v in views if v["bucket"] == name and not v["error"]]
        entry = {"count": len(bucket_views)}
        if bucket_views:
            entry["score"] = _mean(
                [v["metrics"].get(primary_metric(v["task"]), 0.0) for v in bucket_views]
            )
        per_bucket[name] = entry

    extracted = [v for v in views if v["extraction"] is not None]
    cell_reduction = None
    if extracted:
        cell_reduction = {
            "avg_t": _mean([v["extraction"]["cell_counts"]["t"] for v in extracted]),
            "avg_t_c": _mean([v["extraction"]["cell_counts"]["t_c"] for v in extracted]),
            "avg_t_cr": _mean([v["extraction"]["cell_counts"]["t_cr"] for v in extracted]),
        }

    stage_failures: dict[str, dict[str, int]] = {}
    for v in extracted:
        for stage, outcome in v["extraction"]["outcomes"].items():
            stage_failures.setdefault(stage, {})
            stage_failures[stage][outcome] = stage_failures[stage].get(outcome, 0) + 1
    stage_failures = {
        stage: dict(sorted(outcomes.items()))
        for stage, outcomes in sorted(stage_failures.items())
    }

    histogram: dict[str, int] = {}
    for v in views:
        if v["error"]:
            continue
        key = str(v["generation_budget"])
        histogram[key] = histogram.get(key, 0) + 1
    histogram = dict(sorted(histogram.items(), key=lambda kv: int(kv[0])))

    report = {
        "meta": dict(REPORT_META),
        "examples": len(views),
        "errors": sum(1 for v in views if v["error"]),
        "per_task": per_task,
        "per_bucket": per_bucket,
        "cell_reduction": cell_reduction,
        "stage_failures": stage_failures,
        "budget_histogram": histogram,
        "classifier_samples": sum(v["classifier_samples"] for v in views),
        "math_fired": sum(1 for v in views if v["math_fired"]),
    }
    if cfg_echo is not None:
        report["modes"] = {
            "extraction": cfg_echo.get("extraction_mode"),
            "reasoning": cfg_echo.get("reasoning_mode"),
        }
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def format_report(report: dict) -> str:
    """Human-readable rendering of a report."""
    lines = []
    lines.append(f"examples: {report['examples']}   errors: {report['errors']}")
    lines.append("")
    lines.append("per task:")
    for task, entry in report["per_task"].items():
        parts = [f"count={entry['count']}"]
        parts.extend(
            f"{k}={v:.4f}" for k, v in entry.items() if k != "count"
        )
        lines.append(f"  {task:<18} " + "  ".join(parts))
    lines.append("")
    lines.append("per bucket (token size):")
    for name, entry in report["per_bucket"].items():
        score = f"score={entry['score']:.4f}" if "score" in entry else ""
        lines.append(f"  {name:<8} count={entry['count']}  {score}")
    if report["cell_reduction"]:
        cr = report["cell_reduction"]
        lines.append("")
        lines.append("average table cells:")
        lines.append(
            f"  original={cr['avg_t']:.1f}  column-filtered={cr['avg_t_c']:.1f}  "
            f"final={cr['avg_t_cr']:.1f}"
        )
    lines.append("")
    lines.append("generation budget histogram:")
    for key, count in report["budget_histogram"].items():
        lines.append(f"  {key}: {count}")
    if report["stage_failures"]:
        lines.append("")
        lines.append("stage outcomes:")
        for stage, outcomes in report["stage_failures"].items():
            rendered = ", ".join(f"{k}={v}" for k, v in outcomes.items())
            lines.append(f"  {stage:<10} {rendered}")
    return "\n".join(lines)


def trace_filename(example_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", example_id) + ".json"


def write_trace(record: EvalRecord, traces_dir: Path) -> Path:
    traces_dir.mkdir(parents=True, exist_ok=True)
    path = traces_dir / trace_filename(record.id)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record.to_trace_dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def run(cfg: RunConfig) -> tuple[dict, list[EvalRecord]]:
    """Execute the whole pipeline for a dataset; returns (report, records)."""
    cfg.validate()
    if not cfg.dataset:
        raise ConfigError("no dataset configured")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records_src, rejects = load_dataset(cfg.dataset, cfg.adapter)
    if rejects:
        write_rejects(rejects, out_dir / "rejects.jsonl")
        log.warning("%d dataset lines rejected (see rejects.jsonl)", len(rejects))
    examples = list(records_src)
    if cfg.seed is not None:
        random.Random(cfg.seed).shuffle(examples)

    (out_dir / "config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    client = build_client(cfg)
    profile = cfg.resolved_profile()
    extractor = Extractor(client, profile, cfg.table_token_budget, cfg.template_dir)
    reasoner = Reasoner(client, profile, cfg.table_token_budget, cfg.template_dir)

    traces_dir = out_dir / "traces"
    records_log = out_dir / "records.jsonl"
    log_lock = threading.Lock()
    finished: list[EvalRecord] = []

    def handle(record: EvalRecord) -> None:
        write_trace(record, traces_dir)
        line = json.dumps(
            {
                "id": record.id,
                "task": record.task,
                "bucket": record.bucket,
                "generation_budget": record.generation_budget,
                "metrics": record.metrics,
                "error": record.error,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        with log_lock:
            with open(records_log, "a", encoding="utf-8") as f:
                f.write(line + "\n")
            finished.append(record)

    with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
        futures = [
            pool.submit(run_example, ex, extractor, reasoner, cfg) for ex in examples
        ]
        try:
            for future in as_completed(futures):
                handle(future.result())
        except KeyboardInterrupt:
            log.warning("interrupted; draining finished examples into a partial report")
            for future in futures:
                future.cancel()

    report = build_report(finished, cfg.to_dict())
    (out_dir / "report.json").write_text(report_to_json(report), encoding="utf-8")
    return report, finished


def report_from_traces(trace_dir: str | Path, cfg_echo: dict | None = None) -> dict:
    """Recompute the aggregate report from persisted trace files."""
    trace_dir = Path(trace_dir)
    if not trace_dir.is_dir():
        raise ConfigError(f"not a trace directory: {trace_dir}")
    views = []
    for path in sorted(trace_dir.glob("*.json")):
        with open(path, encoding="utf-8") as f:
            views.append(json.load(f))
    if not views:
        raise ConfigError(f"no trace files in {trace_dir}")
    return build_report(views, cfg_echo)
