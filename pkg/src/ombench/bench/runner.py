"""Benchmark trial runner: executes modeling+solving trials and persists records.

A *trial* is one full pipeline pass over one problem (modeling completion,
execution, repair loop, success judgement). A *run* is a grid of trials —
every dataset problem times ``trials`` attempts — written into a run
directory as one JSON record per trial plus an append-only journal used to
resume interrupted runs.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..core import (
    DEFAULT_ABS_TOL,
    DEFAULT_REL_TOL,
    Annotation,
    ProblemInstance,
    ProblemType,
    SizeClass,
    SizeDetails,
    SuccessVerdict,
    evaluate_success,
)
from ..gateway import LLMGateway, TokenUsage
from ..modeling import ModelAgent, ModelingArtifacts, NoCodeBlock, PromptVariant
from ..solving import (
    Diagnosis,
    DiagnosisKind,
    ExecStatus,
    ExecutionLimits,
    ExecutionReport,
    SandboxPort,
    SolveOutcome,
    solve_with_repair,
)

RECORD_VERSION = 1


@dataclass(frozen=True)
class Ports:
    """External services a trial needs: the completion gateway and a sandbox."""

    gateway: LLMGateway
    sandbox: SandboxPort


@dataclass(frozen=True)
class RunConfig:
    model: str
    temperature: float = 0.0
    trials: int = 3
    repair_budget: int = 3
    repair_enabled: bool = True
    variant: PromptVariant = PromptVariant()
    timeout_s: float = 60.0
    memory_mb: int = 512
    capture_limit_bytes: int = 65536
    jobs: int = 1
    abs_tol: float = DEFAULT_ABS_TOL
    rel_tol: float = DEFAULT_REL_TOL
    max_tokens: int | None = None
    template_dir: Path | str | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.repair_budget < 0:
            raise ValueError(f"repair_budget must be >= 0, got {self.repair_budget}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")

    @property
    def variant_label(self) -> str:
        flag = "on" if self.repair_enabled else "off"
        return f"{self.variant.label}.repair-{flag}"

    @property
    def effective_budget(self) -> int:
        return self.repair_budget if self.repair_enabled else 0

    @property
    def limits(self) -> ExecutionLimits:
        return ExecutionLimits(
            wall_time_s=self.timeout_s,
            memory_mb=self.memory_mb,
            capture_limit_bytes=self.capture_limit_bytes,
        )


@dataclass(frozen=True)
class TrialRecord:
    """Everything one trial produced, sufficient to re-aggregate without rerunning."""

    problem_id: str
    dataset: str
    trial_index: int
    seed_tag: str
    variant_label: str
    defects: tuple[str, ...]
    usage_total: TokenUsage
    artifacts: ModelingArtifacts | None = None
    outcome: SolveOutcome | None = None
    verdict: SuccessVerdict | None = None
    annotation: Annotation | None = None

    @property
    def key(self) -> str:
        return f"{self.problem_id}__t{self.trial_index}__{self.variant_label}"

    @property
    def success(self) -> bool:
        """A trial counts as successful only with an explicit passing verdict."""
        return self.verdict is not None and self.verdict.success


def _verdict_for(
    achieved: float | None, annotation: Annotation | None, config: RunConfig
) -> SuccessVerdict | None:
    if annotation is None:
        return None
    return evaluate_success(achieved, annotation.ground_truth, config.abs_tol, config.rel_tol)


def run_trial(
    problem: ProblemInstance, config: RunConfig, ports: Ports, trial_index: int
) -> TrialRecord:
    """Run one trial: model, execute, repair as configured, judge the result."""
    seed_tag = f"t{trial_index}"
    agent = ModelAgent(
        gateway=ports.gateway,
        model=config.model,
        temperature=config.temperature,
        variant=config.variant,
        max_tokens=config.max_tokens,
        template_dir=config.template_dir,
    )
    base: dict[str, Any] = dict(
        problem_id=problem.problem_id,
        dataset=problem.dataset,
        trial_index=trial_index,
        seed_tag=seed_tag,
        variant_label=config.variant_label,
        annotation=problem.annotation,
    )
    try:
        modeling = agent.run(problem, seed_tag=seed_tag)
    except NoCodeBlock as err:
        return TrialRecord(
            defects=("no code block",),
            usage_total=err.usage or TokenUsage(),
            verdict=_verdict_for(None, problem.annotation, config),
            **base,
        )
    outcome = solve_with_repair(
        problem=problem,
        artifacts=modeling.artifacts,
        gateway=ports.gateway,
        sandbox=ports.sandbox,
        model=config.model,
        temperature=config.temperature,
        budget=config.effective_budget,
        limits=config.limits,
        seed_tag=seed_tag,
        max_tokens=config.max_tokens,
        template_dir=config.template_dir,
    )
    return TrialRecord(
        defects=modeling.defects,
        usage_total=modeling.usage + outcome.usage,
        artifacts=modeling.artifacts,
        outcome=outcome,
        verdict=_verdict_for(outcome.achieved, problem.annotation, config),
        **base,
    )


# ---------------------------------------------------------------------------
# Record (de)serialization — plain JSON, no timestamps, non-finite -> null
# ---------------------------------------------------------------------------


def _finite(value: float | None) -> float | None:
    if value is None:
        return None
    return value if math.isfinite(value) else None


def _usage_to_dict(usage: TokenUsage) -> dict[str, int]:
    return {"prompt_tokens": usage.prompt_tokens, "completion_tokens": usage.completion_tokens}


def _report_to_dict(report: ExecutionReport) -> dict[str, Any]:
    return {
        "status": report.status.value,
        "returned_value": _finite(report.returned_value),
        "error_type": report.error_type,
        "traceback_text": report.traceback_text,
        "stdout": report.stdout,
        "stderr": report.stderr,
        "wall_time_s": report.wall_time_s,
    }


def _report_from_dict(data: dict[str, Any]) -> ExecutionReport:
    return ExecutionReport(
        status=ExecStatus(data["status"]),
        returned_value=data.get("returned_value"),
        error_type=data.get("error_type"),
        traceback_text=data.get("traceback_text", ""),
        stdout=data.get("stdout", ""),
        stderr=data.get("stderr", ""),
        wall_time_s=data.get("wall_time_s", 0.0),
    )


def record_to_dict(record: TrialRecord) -> dict[str, Any]:
    outcome = record.outcome
    verdict = record.verdict
    annotation = record.annotation
    artifacts = record.artifacts
    return {
        "version": RECORD_VERSION,
        "problem_id": record.problem_id,
        "dataset": record.dataset,
        "trial_index": record.trial_index,
        "seed_tag": record.seed_tag,
        "variant_label": record.variant_label,
        "defects": list(record.defects),
        "usage_total": _usage_to_dict(record.usage_total),
        "artifacts": None
        if artifacts is None
        else {
            "solution_path": artifacts.solution_path,
            "model_text": artifacts.model_text,
            "code_text": artifacts.code_text,
        },
        "outcome": None
        if outcome is None
        else {
            "final_code": outcome.final_code,
            "repair_iterations": outcome.repair_iterations,
            "diagnosis_history": [
                {"kind": d.kind.value, "detail": d.detail} for d in outcome.diagnosis_history
            ],
            "achieved": _finite(outcome.achieved),
            "usage": _usage_to_dict(outcome.usage),
            "final_report": None
            if outcome.final_report is None
            else _report_to_dict(outcome.final_report),
        },
        "verdict": None
        if verdict is None
        else {
            "success": verdict.success,
            "achieved": _finite(verdict.achieved),
            "ground_truth": verdict.ground_truth,
            "abs_err": _finite(verdict.abs_err),
            "rel_err": _finite(verdict.rel_err),
            "abs_tol": verdict.abs_tol,
            "rel_tol": verdict.rel_tol,
            "reason": verdict.reason,
        },
        "annotation": None
        if annotation is None
        else {
            "ground_truth": annotation.ground_truth,
            "problem_type": None if annotation.problem_type is None else annotation.problem_type.value,
            "problem_size": None if annotation.problem_size is None else annotation.problem_size.value,
            "details": None
            if annotation.details is None
            else {
                "variables_num": annotation.details.variables_num,
                "constraints_num": annotation.details.constraints_num,
                "nonzeros_num": annotation.details.nonzeros_num,
            },
        },
    }


def record_from_dict(data: dict[str, Any]) -> TrialRecord:
    artifacts = data.get("artifacts")
    outcome = data.get("outcome")
    verdict = data.get("verdict")
    annotation = data.get("annotation")
    return TrialRecord(
        problem_id=data["problem_id"],
        dataset=data.get("dataset", ""),
        trial_index=data["trial_index"],
        seed_tag=data["seed_tag"],
        variant_label=data["variant_label"],
        defects=tuple(data.get("defects", ())),
        usage_total=TokenUsage(**data["usage_total"]),
        artifacts=None if artifacts is None else ModelingArtifacts(**artifacts),
        outcome=None
        if outcome is None
        else SolveOutcome(
            final_code=outcome["final_code"],
            repair_iterations=outcome["repair_iterations"],
            diagnosis_history=tuple(
                Diagnosis(kind=DiagnosisKind(d["kind"]), detail=d.get("detail", ""))
                for d in outcome["diagnosis_history"]
            ),
            achieved=outcome.get("achieved"),
            usage=TokenUsage(**outcome["usage"]),
            final_report=None
            if outcome.get("final_report") is None
            else _report_from_dict(outcome["final_report"]),
        ),
        verdict=None
        if verdict is None
        else SuccessVerdict(
            success=verdict["success"],
            achieved=verdict.get("achieved"),
            ground_truth=verdict["ground_truth"],
            abs_err=verdict.get("abs_err"),
            rel_err=verdict.get("rel_err"),
            abs_tol=verdict["abs_tol"],
            rel_tol=verdict["rel_tol"],
            reason=verdict.get("reason"),
        ),
        annotation=None
        if annotation is None
        else Annotation(
            ground_truth=annotation["ground_truth"],
            problem_type=None
            if annotation.get("problem_type") is None
            else ProblemType(annotation["problem_type"]),
            problem_size=None
            if annotation.get("problem_size") is None
            else SizeClass(annotation["problem_size"]),
            details=None
            if annotation.get("details") is None
            else SizeDetails(**annotation["details"]),
        ),
    )


# ---------------------------------------------------------------------------
# Benchmark loop with resumable journal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkRunResult:
    records: tuple[TrialRecord, ...]
    executed: int
    skipped: int
    run_dir: Path


def _record_filename(key: str) -> str:
    return f"{key}.json"


def _write_record(records_dir: Path, record: TrialRecord) -> Path:
    target = records_dir / _record_filename(record.key)
    payload = json.dumps(record_to_dict(record), sort_keys=True, indent=2) + "\n"
    fd, tmp_name = tempfile.mkstemp(dir=records_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def _completed_keys(run_dir: Path, journal_path: Path) -> set[str]:
    done: set[str] = set()
    if not journal_path.exists():
        return done
    for line in journal_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        entry = json.loads(line)
        if (run_dir / entry["file"]).exists():
            done.add(entry["key"])
    return done


def load_run_records(run_dir: Path) -> tuple[TrialRecord, ...]:
    """Load every journaled record of a run, ordered by (problem, trial, variant)."""
    run_dir = Path(run_dir)
    journal_path = run_dir / "journal.jsonl"
    records = []
    for key in _completed_keys(run_dir, journal_path):
        path = run_dir / "records" / _record_filename(key)
        records.append(record_from_dict(json.loads(path.read_text(encoding="utf-8"))))
    records.sort(key=lambda r: (r.problem_id, r.trial_index, r.variant_label))
    return tuple(records)


def run_benchmark(dataset, config: RunConfig, ports: Ports, run_dir: Path) -> BenchmarkRunResult:
    """Run the trial grid over a dataset, journaling each finished trial.

    Rerunning with the same run directory skips trials whose record file is
    already journaled, so an interrupted run resumes where it stopped. With
    ``jobs > 1`` trials execute concurrently; results are returned in dataset
    order regardless of completion order.
    """
    run_dir = Path(run_dir)
    records_dir = run_dir / "records"
    records_dir.mkdir(parents=True, exist_ok=True)
    journal_path = run_dir / "journal.jsonl"
    completed = _completed_keys(run_dir, journal_path)

    tasks = [
        (problem, index)
        for problem in dataset.problems
        for index in range(1, config.trials + 1)
    ]

    def key_for(problem: ProblemInstance, index: int) -> str:
        return f"{problem.problem_id}__t{index}__{config.variant_label}"

    pending = [(p, i) for (p, i) in tasks if key_for(p, i) not in completed]

    journal_lock = threading.Lock()

    def execute(problem: ProblemInstance, index: int) -> None:
        record = run_trial(problem, config, ports, trial_index=index)
        _write_record(records_dir, record)
        entry = {"key": record.key, "file": f"records/{_record_filename(record.key)}"}
        with journal_lock:
            with journal_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry, sort_keys=True) + "\n")

    if pending:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(execute, problem, index) for problem, index in pending]
            try:
                for future in as_completed(futures):
                    future.result()
            except BaseException:
                for future in futures:
                    future.cancel()
                raise

    records = []
    for problem, index in tasks:
        path = records_dir / _record_filename(key_for(problem, index))
        records.append(record_from_dict(json.loads(path.read_text(encoding="utf-8"))))
    return BenchmarkRunResult(
        records=tuple(records),
        executed=len(pending),
        skipped=len(tasks) - len(pending),
        run_dir=run_dir,
    )
