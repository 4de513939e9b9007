"""Command-line interface: solve one problem, run benchmarks, report, label, validate."""
from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path

from .bench.dataset import load_dataset
from .bench.labels import (
    ErrorCategory,
    FailureLabel,
    ModelElement,
    attach_label,
    emit_label_matrix,
    load_labels,
    summarize_labels,
)
from .bench.report import REPORT_FORMATS, aggregate, emit_report
from .bench.runner import Ports, RunConfig, load_run_records, record_to_dict, run_benchmark, run_trial
from .core import DEFAULT_ABS_TOL, DEFAULT_REL_TOL, Annotation, OMBenchError, ProblemInstance
from .gateway import ENV_MODEL, GATEWAY_MODES, LLMGateway, TranscriptStore
from .modeling import Formulation, PromptVariant, Understanding
from .solving import SubprocessSandbox


def _add_gateway_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--model",
        default=os.environ.get(ENV_MODEL),
        help=f"completion model name (default: ${ENV_MODEL})",
    )
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--max-tokens", type=int, default=None)
    parser.add_argument(
        "--mode",
        choices=GATEWAY_MODES,
        default="replay",
        help="live: call the provider; record: call and store; replay: serve stored transcripts",
    )
    parser.add_argument(
        "--transcripts",
        type=Path,
        default=None,
        help="transcript store directory (required for record/replay modes)",
    )
    parser.add_argument(
        "--template-dir",
        type=Path,
        default=None,
        help="directory overriding the built-in prompt templates",
    )


def _add_variant_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--understanding",
        choices=[u.value for u in Understanding],
        default=Understanding.FULL.value,
        help="problem-understanding section variant",
    )
    parser.add_argument(
        "--formulation",
        choices=[f.value for f in Formulation],
        default=Formulation.EXPERT.value,
        help="model-formulation section variant",
    )


def _add_solving_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--repair-budget", type=int, default=3)
    parser.add_argument("--no-repair", action="store_true", help="disable the repair loop")
    parser.add_argument("--timeout-s", type=float, default=60.0)
    parser.add_argument("--memory-mb", type=int, default=512)
    parser.add_argument(
        "--worker-cmd",
        default=None,
        help="command line for the execution worker (default: python -m sandbox_worker)",
    )
    parser.add_argument("--abs-tol", type=float, default=DEFAULT_ABS_TOL)
    parser.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)


def _build_gateway(args: argparse.Namespace, parser: argparse.ArgumentParser) -> LLMGateway:
    store = None
    if args.mode in ("record", "replay"):
        if args.transcripts is None:
            parser.error(f"--mode {args.mode} requires --transcripts")
        store = TranscriptStore(args.transcripts)
    return LLMGateway(mode=args.mode, store=store)


def _build_ports(args: argparse.Namespace, parser: argparse.ArgumentParser) -> Ports:
    worker_cmd = shlex.split(args.worker_cmd) if args.worker_cmd else None
    return Ports(
        gateway=_build_gateway(args, parser),
        sandbox=SubprocessSandbox(worker_cmd=worker_cmd),
    )


def _build_config(
    args: argparse.Namespace, parser: argparse.ArgumentParser, trials: int, jobs: int = 1
) -> RunConfig:
    if not args.model:
        parser.error(f"--model is required (or set ${ENV_MODEL})")
    return RunConfig(
        model=args.model,
        temperature=args.temperature,
        trials=trials,
        repair_budget=args.repair_budget,
        repair_enabled=not args.no_repair,
        variant=PromptVariant(
            understanding=Understanding(args.understanding),
            formulation=Formulation(args.formulation),
        ),
        timeout_s=args.timeout_s,
        memory_mb=args.memory_mb,
        jobs=jobs,
        abs_tol=args.abs_tol,
        rel_tol=args.rel_tol,
        max_tokens=args.max_tokens,
        template_dir=args.template_dir,
    )


def _describe_trial(record) -> str:
    lines = []
    if record.defects:
        lines.append("defects: " + ", ".join(record.defects))
    if record.outcome is not None:
        achieved = record.outcome.achieved
        lines.append(f"achieved: {achieved if achieved is not None else 'none'}")
        lines.append(f"repair iterations: {record.outcome.repair_iterations}")
        lines.append(
            "diagnosis: " + " -> ".join(d.kind.value for d in record.outcome.diagnosis_history)
        )
    lines.append(
        f"tokens: prompt={record.usage_total.prompt_tokens} "
        f"completion={record.usage_total.completion_tokens}"
    )
    if record.verdict is not None:
        verdict = record.verdict
        judged = "success" if verdict.success else "failure"
        lines.append(f"verdict: {judged} (ground truth {verdict.ground_truth})")
        if verdict.reason:
            lines.append(f"reason: {verdict.reason}")
    return "\n".join(lines)


def cmd_solve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    description_path = Path(args.description)
    annotation = None if args.ground_truth is None else Annotation(ground_truth=args.ground_truth)
    problem = ProblemInstance(
        problem_id=description_path.stem,
        description=description_path.read_text(encoding="utf-8"),
        annotation=annotation,
        dataset="adhoc",
    )
    config = _build_config(args, parser, trials=1)
    ports = _build_ports(args, parser)
    record = run_trial(problem, config, ports, trial_index=1)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{record.key}.json"
        path.write_text(
            json.dumps(record_to_dict(record), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"record written to {path}")
    print(_describe_trial(record))
    if record.verdict is not None and not record.verdict.success:
        return 1
    return 0


def cmd_bench(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    dataset = load_dataset(args.dataset)
    for flag in dataset.flags:
        print(f"dataset flag: {flag}", file=sys.stderr)
    config = _build_config(args, parser, trials=args.trials, jobs=args.jobs)
    ports = _build_ports(args, parser)
    result = run_benchmark(dataset, config, ports, Path(args.run_dir))
    total = len(result.records)
    print(f"trials: {total} ({result.executed} executed, {result.skipped} resumed)")
    print()
    print(emit_report(aggregate(result.records, group_by=("problem_type",)), "table"))
    overall = aggregate(result.records, group_by=())
    print(f"overall success rate: {overall.rows[0].success_rate * 100:.2f}%")
    return 0


def cmd_report(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    records = load_run_records(Path(args.run_dir))
    if not records:
        print(f"no records found under {args.run_dir}", file=sys.stderr)
        return 1
    group_by = tuple(dim.strip() for dim in args.group_by.split(",") if dim.strip())
    text = emit_report(aggregate(records, group_by=group_by), args.format)
    if args.out is not None:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report written to {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_label(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    run_dir = Path(args.run_dir)
    if args.summary:
        print(emit_label_matrix(summarize_labels(load_labels(run_dir))), end="")
        return 0
    if args.record_key is None or args.category is None or args.element is None:
        parser.error("labeling requires RECORD_KEY, --category and --element (or use --summary)")
    label = FailureLabel(
        record_key=args.record_key,
        error_category=ErrorCategory(args.category),
        element=ModelElement(args.element),
        note=args.note,
    )
    attach_label(run_dir, label)
    print(f"labeled {args.record_key}: {args.category}/{args.element}")
    return 0


def cmd_validate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    dataset = load_dataset(args.dataset)
    print(f"{len(dataset.problems)} problems in {dataset.name}")
    for flag in dataset.flags:
        print(f"flag: {flag}")
    return 2 if dataset.flags else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ombench",
        description="Benchmark LLM agents that build and solve optimization models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the full pipeline once on a problem description")
    p_solve.add_argument("description", help="path to a problem description text file")
    p_solve.add_argument("--ground-truth", type=float, default=None)
    p_solve.add_argument("--out", type=Path, default=None, help="directory to write the trial record")
    _add_gateway_flags(p_solve)
    _add_variant_flags(p_solve)
    _add_solving_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="run the benchmark grid over a dataset")
    p_bench.add_argument("dataset", help="dataset directory (manifest.json + problems/)")
    p_bench.add_argument("run_dir", help="output directory for records and the journal")
    p_bench.add_argument("--trials", type=int, default=3)
    p_bench.add_argument("--jobs", type=int, default=1)
    _add_gateway_flags(p_bench)
    _add_variant_flags(p_bench)
    _add_solving_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_report = sub.add_parser("report", help="aggregate a finished run into a report")
    p_report.add_argument("run_dir")
    p_report.add_argument("--group-by", default="dataset", help="comma-separated dimensions")
    p_report.add_argument("--format", choices=REPORT_FORMATS, default="table")
    p_report.add_argument("--out", type=Path, default=None)
    p_report.set_defaults(func=cmd_report)

    p_label = sub.add_parser("label", help="attach failure labels to trial records")
    p_label.add_argument("run_dir")
    p_label.add_argument("record_key", nargs="?", default=None)
    p_label.add_argument("--category", choices=[c.value for c in ErrorCategory], default=None)
    p_label.add_argument("--element", choices=[e.value for e in ModelElement], default=None)
    p_label.add_argument("--note", default="")
    p_label.add_argument("--summary", action="store_true", help="print the label count matrix")
    p_label.set_defaults(func=cmd_label)

    p_validate = sub.add_parser("validate", help="check a dataset directory for consistency")
    p_validate.add_argument("dataset")
    p_validate.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except OMBenchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
