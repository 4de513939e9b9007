"""Two-agent LLM pipeline and benchmark harness for natural-language optimization modeling.

The package splits into:

* :mod:`ombench.gateway` — LLM access with deterministic record/replay,
* :mod:`ombench.modeling` — turns a problem description into solver code,
* :mod:`ombench.solving` — executes that code and repairs execution failures,
* :mod:`ombench.bench` — datasets, benchmark runs, metrics, failure labels,
* :mod:`ombench.cli` — the ``ombench`` command.
"""
from .core import (
    Annotation,
    OMBenchError,
    ProblemInstance,
    ProblemType,
    SizeClass,
    SizeDetails,
    SuccessVerdict,
    classify_size,
    evaluate_success,
)
from .gateway import (
    GATEWAY_MODES,
    Completion,
    CompletionRequest,
    LLMGateway,
    ReplayMiss,
    TokenUsage,
    TranscriptStore,
)
from .modeling import (
    Formulation,
    ModelAgent,
    ModelingArtifacts,
    NoCodeBlock,
    PromptVariant,
    Understanding,
)
from .solving import (
    Diagnosis,
    DiagnosisKind,
    ExecStatus,
    ExecutionLimits,
    ExecutionReport,
    FakeSandbox,
    SolveOutcome,
    SubprocessSandbox,
    detect,
    solve_with_repair,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "Completion",
    "CompletionRequest",
    "Diagnosis",
    "DiagnosisKind",
    "ExecStatus",
    "ExecutionLimits",
    "ExecutionReport",
    "FakeSandbox",
    "Formulation",
    "GATEWAY_MODES",
    "LLMGateway",
    "ModelAgent",
    "ModelingArtifacts",
    "NoCodeBlock",
    "OMBenchError",
    "ProblemInstance",
    "ProblemType",
    "PromptVariant",
    "ReplayMiss",
    "SizeClass",
    "SizeDetails",
    "SolveOutcome",
    "SubprocessSandbox",
    "SuccessVerdict",
    "TokenUsage",
    "TranscriptStore",
    "Understanding",
    "classify_size",
    "detect",
    "evaluate_success",
    "solve_with_repair",
    "__version__",
]
