"""Operator entry points: batch runs, single-question asks, report recomputation.

Exit status: 0 on completed work (per-example failures included), 1 on
configuration or I/O errors, 2 on bad command lines (argparse).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .dataset import ADAPTERS, DatasetError
from .extraction import EXTRACTION_MODES, Extractor
from .gateway import GatewayError, generation_budget
from .prompting import TASKS
from .reasoning import REASONING_MODES, Reasoner
from .runner import (
    EvalRecord,
    build_client,
    format_report,
    report_from_traces,
    report_to_json,
    run,
    write_trace,
)
from .table import StructuralError, cell_count, encode_pipe, load_table

log = logging.getLogger(__name__)


class CliError(Exception):
    pass


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        "dataset": getattr(args, "dataset", None),
        "adapter": getattr(args, "adapter", None),
        "backend": getattr(args, "backend", None),
        "endpoint": getattr(args, "endpoint", None),
        "model": getattr(args, "model", None),
        "fixtures_dir": getattr(args, "fixtures", None),
        "profile": getattr(args, "profile", None),
        "extraction_mode": getattr(args, "extraction_mode", None),
        "reasoning_mode": getattr(args, "reasoning_mode", None),
        "concurrency": getattr(args, "concurrency", None),
        "output_dir": getattr(args, "out", None),
        "seed": getattr(args, "seed", None),
        "template_dir": getattr(args, "templates", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def cmd_run(args) -> int:
    cfg = _load_config(args)
    report, _ = run(cfg)
    print(format_report(report))
    print(f"\nwrote {cfg.output_dir}/report.json")
    return 0


def cmd_ask(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    try:
        raw = json.loads(Path(args.table).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(f"table file not found: {args.table}")
    except json.JSONDecodeError as exc:
        raise CliError(f"table file is not valid JSON: {exc}")
    try:
        table = load_table(raw)
    except StructuralError as exc:
        raise CliError(f"malformed table: {exc}")

    client = build_client(cfg)
    profile = cfg.resolved_profile()
    extractor = Extractor(client, profile, cfg.table_token_budget, cfg.template_dir)
    reasoner = Reasoner(client, profile, cfg.table_token_budget, cfg.template_dir)

    t_cr, trace = extractor.extract(table, args.question, cfg.extraction_mode)
    result = reasoner.reason(t_cr, args.question, args.task, cfg.reasoning_mode)

    if args.verbose:
        print(f"C1: {trace.c1!r}")
        print(f"C2: {trace.c2!r}")
        print(f"C': {trace.c_final!r}")
        print(f"R1: {trace.r1!r}")
        print(f"R2: {trace.r2!r}")
        print(f"R': {trace.r_final!r}")
        print(f"T_CR cells: {cell_count(t_cr)}")
        print("T_CR:")
        print(encode_pipe(t_cr))
        print(f"math branch: {'yes' if result.math_fired else 'no'}")
        if result.evidence is not None:
            print(f"evidence query: {result.evidence.query_text}")
            print("evidence:")
            print(result.evidence.result_block or "(none)")
    answer = result.answer
    label = f" [{answer.label}]" if answer.label else ""
    abstain = " (abstained)" if answer.abstained else ""
    print(f"answer: {answer.text}{label}{abstain}")

    if args.trace_out:
        record = EvalRecord(
            id="ask", task=args.task, question=args.question, gold="",
            answer=answer, evidence=result.evidence, trace=trace,
            exchanges=list(trace.exchanges) + list(result.exchanges),
        )
        record.generation_budget = generation_budget(record.exchanges)
        path = write_trace(record, Path(args.trace_out))
        print(f"trace: {path}")
    return 0


def _locate_traces(path: Path) -> tuple[Path, dict | None]:
    """Accept either a run directory (with traces/ and config.json) or a bare
    trace directory whose parent may hold the config echo."""
    if (path / "traces").is_dir():
        traces = path / "traces"
        config = path / "config.json"
    else:
        traces = path
        config = path.parent / "config.json"
    echo = None
    if config.is_file():
        echo = json.loads(config.read_text(encoding="utf-8"))
    return traces, echo


def cmd_report(args) -> int:
    traces, echo = _locate_traces(Path(args.traces))
    report = report_from_traces(traces, echo)
    print(format_report(report))
    if args.out:
        Path(args.out).write_text(report_to_json(report), encoding="utf-8")
        print(f"\nwrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabqa",
        description="Hybrid SQL/text table QA: multi-view extraction plus adaptive reasoning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--backend", choices=["live", "record", "replay"])
        p.add_argument("--endpoint", help="chat-completion endpoint URL")
        p.add_argument("--model", help="model name sent to the endpoint")
        p.add_argument("--fixtures", help="fixture directory for record/replay")
        p.add_argument("--profile", help="sampling profile name")
        p.add_argument("--extraction-mode", choices=list(EXTRACTION_MODES))
        p.add_argument("--reasoning-mode", choices=list(REASONING_MODES))
        p.add_argument("--templates", help="directory overriding packaged prompt templates")

    p_run = sub.add_parser("run", help="run the pipeline over a dataset")
    add_common(p_run)
    p_run.add_argument("--dataset", help="JSONL dataset path")
    p_run.add_argument("--adapter", choices=list(ADAPTERS))
    p_run.add_argument("--concurrency", type=int)
    p_run.add_argument("--seed", type=int, help="shuffles example order only")
    p_run.add_argument("--out", help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_ask = sub.add_parser("ask", help="answer one question over one table")
    add_common(p_ask)
    p_ask.add_argument("--table", required=True, help="JSON table file {caption?, header, rows}")
    p_ask.add_argument("--question", required=True)
    p_ask.add_argument("--task", choices=list(TASKS), default="short_qa")
    p_ask.add_argument("--verbose", action="store_true",
                       help="print extraction sets, the final table, and evidence")
    p_ask.add_argument("--trace-out", help="directory to write the trace JSON into")
    p_ask.set_defaults(func=cmd_ask)

    p_rep = sub.add_parser("report", help="recompute a report from trace files")
    p_rep.add_argument("--traces", required=True, help="run directory or trace directory")
    p_rep.add_argument("--out", help="write the report JSON here as well")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, DatasetError, GatewayError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
