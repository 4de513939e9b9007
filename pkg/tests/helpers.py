"""Shared scripted doubles for harness tests: transports and record factories."""
from __future__ import annotations

from dataclasses import dataclass, field

from ombench.bench.runner import TrialRecord
from ombench.core import Annotation, ProblemType, SizeClass, evaluate_success
from ombench.gateway import Completion, CompletionRequest, TokenUsage
from ombench.solving import Diagnosis, DiagnosisKind, SolveOutcome


@dataclass
class Script:
    """Completions for one problem: the modeling reply plus repair replies in order."""

    modeling: str
    repairs: list[str] = field(default_factory=list)
    modeling_usage: TokenUsage = TokenUsage(prompt_tokens=100, completion_tokens=50)
    repair_usage: TokenUsage = TokenUsage(prompt_tokens=80, completion_tokens=40)


class FixtureTransport:
    """Serves scripted completions by matching the problem description in the prompt.

    Repair requests are recognized by their "/repair<k>" seed-tag suffix and
    served from the problem's repair list by iteration index, so the same
    script replays identically for every trial seed.
    """

    def __init__(self, scripts: dict[str, Script], descriptions: dict[str, str]) -> None:
        self.scripts = scripts
        self.descriptions = descriptions
        self.requests: list[CompletionRequest] = []

    def _problem_for(self, prompt: str) -> str:
        matches = [
            pid for pid, description in self.descriptions.items()
            if description.strip() and description.strip() in prompt
        ]
        if len(matches) != 1:
            raise AssertionError(f"prompt matched problems {matches!r}")
        return matches[0]

    def __call__(self, request: CompletionRequest) -> Completion:
        self.requests.append(request)
        prompt = request.messages[-1][1]
        script = self.scripts[self._problem_for(prompt)]
        if "/repair" in request.seed_tag:
            index = int(request.seed_tag.rsplit("/repair", 1)[1]) - 1
            if index >= len(script.repairs):
                raise AssertionError(f"no scripted repair #{index + 1}")
            return Completion(text=script.repairs[index], usage=script.repair_usage)
        return Completion(text=script.modeling, usage=script.modeling_usage)


def modeling_completion(code: str, model_text: str = "Objective:\n1. min cost") -> str:
    """A well-formed modeling completion wrapping the given code block."""
    return (
        "<solution_path>\nWork through the problem.\n</solution_path>\n\n"
        f"```model\n{model_text}\n```\n\n"
        f"```python\n{code}\n```\n"
    )


def repair_completion(code: str) -> str:
    return f"The bug is fixed below.\n\n```code\n{code}\n```\n"


def make_record(
    problem_id: str = "p",
    dataset: str = "ds",
    trial_index: int = 1,
    variant_label: str = "u-full.f-expert.repair-on",
    success: bool | None = None,
    ground_truth: float = 1.0,
    achieved: float | None = None,
    usage: tuple[int, int] = (10, 5),
    repairs: int = 0,
    problem_type: ProblemType | None = None,
    problem_size: SizeClass | None = None,
) -> TrialRecord:
    """Build a minimal but well-formed trial record for aggregation tests.

    ``success=None`` leaves the verdict unset (unjudged trial); True/False
    produce a real verdict computed against ``ground_truth``.
    """
    annotation = Annotation(
        ground_truth=ground_truth, problem_type=problem_type, problem_size=problem_size
    )
    if success is True:
        achieved = ground_truth
        verdict = evaluate_success(achieved, ground_truth)
        assert verdict.success
    elif success is False:
        verdict = evaluate_success(achieved, ground_truth)
        assert not verdict.success
    else:
        verdict = None
    outcome = SolveOutcome(
        final_code="def solve():\n    return 0.0\n",
        repair_iterations=repairs,
        diagnosis_history=(Diagnosis(kind=DiagnosisKind.SOLVED),),
        achieved=achieved,
        usage=TokenUsage(),
    )
    return TrialRecord(
        problem_id=problem_id,
        dataset=dataset,
        trial_index=trial_index,
        seed_tag=f"t{trial_index}",
        variant_label=variant_label,
        defects=(),
        usage_total=TokenUsage(prompt_tokens=usage[0], completion_tokens=usage[1]),
        outcome=outcome,
        verdict=verdict,
        annotation=annotation,
    )


class FailingTransport:
    """Delegates to an inner transport but fails permanently from call N on."""

    def __init__(self, inner, fail_from: int) -> None:
        self.inner = inner
        self.fail_from = fail_from
        self.calls = 0

    def __call__(self, request: CompletionRequest) -> Completion:
        self.calls += 1
        if self.calls >= self.fail_from:
            raise RuntimeError("transport failed mid-run")
        return self.inner(request)
