"""Solve agent: executes generated code and drives the detect-diagnose-repair loop.

Execution happens behind a :class:`SandboxPort`; two implementations ship here —
a subprocess client speaking the JSON-line wire protocol to an external worker,
and an in-process fake for deterministic tests that never spawns anything.
"""
from __future__ import annotations

import json
import math
import re
import subprocess
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .core import OMBenchError, ProblemInstance
from .gateway import CompletionRequest, LLMGateway, TokenUsage
from .modeling import ModelingArtifacts, NoCodeBlock, build_repair_prompt, extract_code_block


class SandboxUnavailable(OMBenchError):
    """The execution sandbox cannot be started at all."""


class ExecStatus(str, Enum):
    RETURNED = "returned"
    EXCEPTION = "exception"
    TIMEOUT = "timeout"
    PROTOCOL = "protocol"


@dataclass(frozen=True)
class ExecutionLimits:
    wall_time_s: float = 60.0
    memory_mb: int = 512
    capture_limit_bytes: int = 65536


@dataclass(frozen=True)
class ExecutionReport:
    """Outcome of running one generated program in a sandbox.

    With status RETURNED, ``returned_value`` carries the objective; ``None``
    is the explicit no-solution marker (the generated function returned none).
    """

    status: ExecStatus
    returned_value: float | None = None
    error_type: str | None = None
    traceback_text: str = ""
    stdout: str = ""
    stderr: str = ""
    wall_time_s: float = 0.0


class DiagnosisKind(str, Enum):
    SOLVED = "solved"
    NO_SOLUTION = "no_solution"
    EXECUTION_ERROR = "execution_error"
    TIMEOUT = "timeout"
    PROTOCOL = "protocol"


@dataclass(frozen=True)
class Diagnosis:
    kind: DiagnosisKind
    detail: str = ""


REPAIR_ELIGIBLE = frozenset({DiagnosisKind.EXECUTION_ERROR, DiagnosisKind.TIMEOUT})


def detect(report: ExecutionReport) -> Diagnosis:
    """Classify an execution report; only execution failures are repair-eligible.

    A clean no-solution return (the model judged infeasible/unbounded) is
    terminal: the code ran correctly, so there is nothing to repair.
    """
    if report.status is ExecStatus.RETURNED:
        if report.returned_value is None:
            return Diagnosis(DiagnosisKind.NO_SOLUTION, "program reported no feasible solution")
        if not math.isfinite(report.returned_value):
            return Diagnosis(
                DiagnosisKind.NO_SOLUTION,
                f"objective value is not finite: {report.returned_value!r}",
            )
        return Diagnosis(DiagnosisKind.SOLVED)
    if report.status is ExecStatus.EXCEPTION:
        summary = report.error_type or "exception"
        last_line = report.traceback_text.strip().splitlines()[-1] if report.traceback_text.strip() else ""
        detail = last_line if last_line.startswith(summary) else f"{summary}: {last_line}".rstrip(": ")
        return Diagnosis(DiagnosisKind.EXECUTION_ERROR, detail)
    if report.status is ExecStatus.TIMEOUT:
        return Diagnosis(DiagnosisKind.TIMEOUT, f"execution exceeded {report.wall_time_s} seconds")
    return Diagnosis(DiagnosisKind.PROTOCOL, report.stderr or "sandbox protocol violation")


class SandboxPort(Protocol):
    """Anything that can execute generated code under limits and report back."""

    def run(self, code: str, limits: ExecutionLimits) -> ExecutionReport:
        ...


# ---------------------------------------------------------------------------
# in-process fake sandbox
# ---------------------------------------------------------------------------

_DIRECTIVE_RE = re.compile(r"^[ \t]*#\s*sandbox:\s*(.+?)\s*$", re.MULTILINE)


class FakeSandbox:
    """Scripted in-process sandbox: maps code markers to canned reports.

    An explicit ``script`` maps code substrings to reports (first match in
    insertion order wins). Otherwise the code's own ``# sandbox: ...``
    directive line decides: ``return <number>``, ``return none``,
    ``raise <ErrorType> [message]``, ``timeout``, or ``protocol``.
    """

    def __init__(self, script: Mapping[str, ExecutionReport] | None = None) -> None:
        self.script = dict(script or {})
        self.calls: list[str] = []

    def run(self, code: str, limits: ExecutionLimits) -> ExecutionReport:
        self.calls.append(code)
        for marker, report in self.script.items():
            if marker in code:
                return report
        match = _DIRECTIVE_RE.search(code)
        if match is None:
            return ExecutionReport(
                status=ExecStatus.PROTOCOL,
                stderr="fake sandbox: no scripted outcome matches the code",
            )
        return self._from_directive(match.group(1), limits)

    @staticmethod
    def _from_directive(directive: str, limits: ExecutionLimits) -> ExecutionReport:
        head, _, rest = directive.partition(" ")
        head = head.lower()
        if head == "return":
            value = rest.strip()
            if value.lower() in ("none", "null"):
                return ExecutionReport(status=ExecStatus.RETURNED, returned_value=None)
            return ExecutionReport(status=ExecStatus.RETURNED, returned_value=float(value))
        if head == "raise":
            error_type, _, message = rest.partition(" ")
            error_type = error_type or "RuntimeError"
            traceback_text = (
                "Traceback (most recent call last):\n"
                '  File "<generated>", line 1, in <module>\n'
                f"{error_type}: {message}".rstrip(": ")
            )
            return ExecutionReport(
                status=ExecStatus.EXCEPTION, error_type=error_type, traceback_text=traceback_text
            )
        if head == "timeout":
            return ExecutionReport(status=ExecStatus.TIMEOUT, wall_time_s=limits.wall_time_s)
        if head == "protocol":
            return ExecutionReport(status=ExecStatus.PROTOCOL, stderr="scripted protocol violation")
        return ExecutionReport(
            status=ExecStatus.PROTOCOL, stderr=f"fake sandbox: unknown directive {directive!r}"
        )


# ---------------------------------------------------------------------------
# subprocess sandbox client
# ---------------------------------------------------------------------------

# Margin on top of the request timeout before the client gives up on a worker
# that should have killed its own child long ago.
_WORKER_GRACE_S = 30.0


class SubprocessSandbox:
    """Runs code via an external worker process speaking JSON lines over stdio.

    One worker process is spawned per execution: the request is a single JSON
    line on stdin, the response is the final JSON line on stdout. The worker
    itself enforces the execution limits; this client only maps the wire
    response onto :class:`ExecutionReport`.
    """

    def __init__(
        self,
        worker_cmd: Sequence[str] | None = None,
        env: Mapping[str, str] | None = None,
    ) -> None:
        self.worker_cmd = list(worker_cmd) if worker_cmd else [sys.executable, "-m", "sandbox_worker"]
        self.env = dict(env) if env is not None else None

    def run(self, code: str, limits: ExecutionLimits) -> ExecutionReport:
        request = {
            "code": code,
            "entry": None,
            "timeout_s": limits.wall_time_s,
            "memory_mb": limits.memory_mb,
            "capture_limit_bytes": limits.capture_limit_bytes,
        }
        try:
            proc = subprocess.run(
                self.worker_cmd,
                input=json.dumps(request) + "\n",
                capture_output=True,
                text=True,
                timeout=limits.wall_time_s + _WORKER_GRACE_S,
                env=self.env,
            )
        except FileNotFoundError as err:
            raise SandboxUnavailable(f"cannot start worker {self.worker_cmd!r}: {err}") from err
        except subprocess.TimeoutExpired:
            return ExecutionReport(
                status=ExecStatus.PROTOCOL,
                stderr=f"worker did not respond within {limits.wall_time_s + _WORKER_GRACE_S}s",
                wall_time_s=limits.wall_time_s + _WORKER_GRACE_S,
            )
        return self._parse_response(proc)

    @staticmethod
    def _parse_response(proc: subprocess.CompletedProcess) -> ExecutionReport:
        lines = [line for line in proc.stdout.splitlines() if line.strip()]
        if not lines:
            return ExecutionReport(
                status=ExecStatus.PROTOCOL,
                stderr=f"worker produced no response (exit {proc.returncode}): "
                       f"{proc.stderr.strip()[-500:]}",
            )
        try:
            payload = json.loads(lines[-1])
            status = ExecStatus(payload["status"])
        except (json.JSONDecodeError, KeyError, ValueError):
            return ExecutionReport(
                status=ExecStatus.PROTOCOL,
                stderr=f"worker response is not a valid frame: {lines[-1][:200]!r}",
            )
        returned = payload.get("returned")
        return ExecutionReport(
            status=status,
            returned_value=float(returned) if returned is not None else None,
            error_type=payload.get("error_type"),
            traceback_text=payload.get("traceback") or "",
            stdout=payload.get("stdout") or "",
            stderr=payload.get("stderr") or "",
            wall_time_s=float(payload.get("wall_time_s") or 0.0),
        )


# ---------------------------------------------------------------------------
# repair loop
# ---------------------------------------------------------------------------

_ERROR_MESSAGE_LIMIT = 4000


@dataclass(frozen=True)
class SolveOutcome:
    final_code: str
    repair_iterations: int
    diagnosis_history: tuple[Diagnosis, ...]
    achieved: float | None
    usage: TokenUsage
    final_report: ExecutionReport | None = None


def _error_message_for(report: ExecutionReport, limits: ExecutionLimits) -> str:
    if report.status is ExecStatus.TIMEOUT:
        return (
            f"Execution timed out after {limits.wall_time_s:g} seconds and was terminated. "
            "The program most likely contains an infinite loop or an unboundedly growing model."
        )
    message = report.traceback_text.strip() or (report.error_type or "unknown execution error")
    if len(message) > _ERROR_MESSAGE_LIMIT:
        message = "... " + message[-_ERROR_MESSAGE_LIMIT:]
    return message


def solve_with_repair(
    *,
    problem: ProblemInstance,
    artifacts: ModelingArtifacts,
    gateway: LLMGateway,
    sandbox: SandboxPort,
    model: str,
    temperature: float = 0.0,
    budget: int = 3,
    limits: ExecutionLimits = ExecutionLimits(),
    seed_tag: str = "",
    max_tokens: int | None = None,
    template_dir: Path | str | None = None,
) -> SolveOutcome:
    """Execute generated code, repairing execution failures up to ``budget`` times.

    Guarantees: at most ``budget + 1`` sandbox executions, at most ``budget``
    gateway calls, and ``len(diagnosis_history) == repair_iterations + 1``.
    Each repair prompt embeds exactly the code that just failed together with
    its error message (synthesized for timeouts).
    """
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    usage = TokenUsage()
    code = artifacts.code_text
    report = sandbox.run(code, limits)
    diagnosis = detect(report)
    history = [diagnosis]
    iterations = 0

    while diagnosis.kind in REPAIR_ELIGIBLE and iterations < budget:
        prompt = build_repair_prompt(
            problem.description,
            artifacts.model_text,
            code,
            _error_message_for(report, limits),
            template_dir,
        )
        request = CompletionRequest(
            model=model,
            messages=(("user", prompt),),
            temperature=temperature,
            max_tokens=max_tokens,
            seed_tag=f"{seed_tag}/repair{iterations + 1}",
        )
        completion = gateway.complete(request)
        usage = usage + completion.usage
        iterations += 1
        try:
            code = extract_code_block(completion.text)
        except NoCodeBlock:
            diagnosis = Diagnosis(
                DiagnosisKind.PROTOCOL, "repair completion contained no code block"
            )
            history.append(diagnosis)
            break
        report = sandbox.run(code, limits)
        diagnosis = detect(report)
        history.append(diagnosis)

    achieved = report.returned_value if history[-1].kind is DiagnosisKind.SOLVED else None
    return SolveOutcome(
        final_code=code,
        repair_iterations=iterations,
        diagnosis_history=tuple(history),
        achieved=achieved,
        usage=usage,
        final_report=report,
    )
