"""Model agent: prompt assembly (with ablation variants) and artifact extraction.

The prompt wording ships verbatim as text resources under ``ombench/prompts``;
this module only performs placeholder substitution and the literal section
surgery that defines the ablation variants.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .core import MalformedModel, OMBenchError, ProblemInstance, parse_model_sections
from .gateway import CompletionRequest, LLMGateway, TokenUsage

# Marker lines of the three numbered prompt sections, used for variant surgery.
SECTION_UNDERSTANDING = "1. Understanding the Problem"
SECTION_FORMULATION = "2. Building the Mathematical Model (Step by Step)"
SECTION_CODE = "3. Gurobipy Python Code"

MODEL_UNAVAILABLE_NOTE = "(mathematical model unavailable)"


class NoCodeBlock(OMBenchError):
    """The completion contains no extractable code block.

    When raised by :meth:`ModelAgent.run`, ``usage`` carries the tokens the
    failed completion still consumed, so callers can account for them.
    """

    usage = None


class TemplateError(OMBenchError):
    """A prompt template is missing an expected placeholder or section marker."""


class Understanding(str, Enum):
    FULL = "full"
    PLAIN = "plain"
    REMOVED = "removed"


class Formulation(str, Enum):
    EXPERT = "expert"
    PLAIN = "plain"


@dataclass(frozen=True)
class PromptVariant:
    """One cell of the understanding x formulation prompt-ablation grid."""

    understanding: Understanding = Understanding.FULL
    formulation: Formulation = Formulation.EXPERT

    def __post_init__(self) -> None:
        object.__setattr__(self, "understanding", Understanding(self.understanding))
        object.__setattr__(self, "formulation", Formulation(self.formulation))

    @property
    def label(self) -> str:
        return f"u-{self.understanding.value}.f-{self.formulation.value}"


ALL_VARIANTS = tuple(
    PromptVariant(understanding=u, formulation=f) for u in Understanding for f in Formulation
)


def load_template(name: str, template_dir: Path | str | None = None) -> str:
    """Load a prompt template resource, preferring an override directory when given."""
    if template_dir is not None:
        override = Path(template_dir) / f"{name}.txt"
        if override.exists():
            return override.read_text(encoding="utf-8")
    resource = resources.files("ombench.prompts").joinpath(f"{name}.txt")
    if not resource.is_file():
        raise FileNotFoundError(f"no prompt template named {name!r}")
    return resource.read_text(encoding="utf-8")


def _marker_start(template: str, marker: str) -> int:
    match = re.search(rf"^{re.escape(marker)}[ \t]*$", template, re.MULTILINE)
    if match is None:
        raise TemplateError(f"template lacks section marker {marker!r}")
    return match.start()


def apply_variant(template: str, variant: PromptVariant) -> str:
    """Rewrite the template for an ablation variant by literal section replacement.

    Sections are the blocks starting at the three numbered marker lines; only
    the targeted block changes, everything else stays byte-identical.
    """
    if variant.understanding is Understanding.FULL and variant.formulation is Formulation.EXPERT:
        return template
    u_start = _marker_start(template, SECTION_UNDERSTANDING)
    f_start = _marker_start(template, SECTION_FORMULATION)
    c_start = _marker_start(template, SECTION_CODE)
    if not u_start < f_start < c_start:
        raise TemplateError("template sections are out of order")

    understanding_block = template[u_start:f_start]
    if variant.understanding is Understanding.PLAIN:
        understanding_block = load_template("understanding_plain").rstrip("\n") + "\n\n\n"
    elif variant.understanding is Understanding.REMOVED:
        understanding_block = ""

    formulation_block = template[f_start:c_start]
    if variant.formulation is Formulation.PLAIN:
        formulation_block = load_template("formulation_plain").rstrip("\n") + "\n\n\n"

    return template[:u_start] + understanding_block + formulation_block + template[c_start:]


def build_model_prompt(
    description: str,
    variant: PromptVariant = PromptVariant(),
    template_dir: Path | str | None = None,
) -> str:
    """Assemble the modeling prompt for a problem description.

    Substitution is a literal single replacement of the ``{nlp}`` placeholder;
    every other brace in the template (including doubled braces in the math
    examples) is preserved verbatim.
    """
    template = load_template("modeling", template_dir)
    prompt = apply_variant(template, variant)
    return prompt.replace("{nlp}", description)


_REPAIR_PLACEHOLDER_RE = re.compile(r"\{(nlp|model_text|code_text|error_message)\}")


def build_repair_prompt(
    description: str,
    model_text: str,
    code_text: str,
    error_message: str,
    template_dir: Path | str | None = None,
) -> str:
    """Assemble the repair prompt embedding the failing code and its error.

    All four placeholders are substituted in one simultaneous pass, so
    placeholder-looking text inside the substituted values is never re-expanded.
    An empty model text is replaced by a sentinel note.
    """
    template = load_template("repair", template_dir)
    values = {
        "nlp": description,
        "model_text": model_text if model_text.strip() else MODEL_UNAVAILABLE_NOTE,
        "code_text": code_text,
        "error_message": error_message,
    }
    return _REPAIR_PLACEHOLDER_RE.sub(lambda match: values[match.group(1)], template)


# ---------------------------------------------------------------------------
# artifact extraction
# ---------------------------------------------------------------------------

_SOLUTION_OPEN = "<solution_path>"
_SOLUTION_CLOSE = "</solution_path>"
_FENCE_RE = re.compile(r"^\s{0,3}\*{0,2}```([A-Za-z0-9_+-]*)\*{0,2}\s*$")
_CODE_LANGS = frozenset({"python", "py", "code"})
_MODEL_LANG = "model"


@dataclass(frozen=True)
class ModelingArtifacts:
    solution_path: str
    model_text: str
    code_text: str


def iter_fenced_blocks(text: str) -> list[tuple[str, str]]:
    """List (language, content) for every fenced block, in document order.

    A fence line may be bold-wrapped. While a block is open, only a bare
    closing fence terminates it; an unterminated final block runs to the end
    of the text (salvaging truncated completions).
    """
    blocks: list[tuple[str, str]] = []
    language: str | None = None
    buffer: list[str] = []
    for line in text.split("\n"):
        match = _FENCE_RE.match(line)
        if language is None:
            if match:
                language = match.group(1).lower()
                buffer = []
        elif match and not match.group(1):
            blocks.append((language, "\n".join(buffer)))
            language = None
        else:
            buffer.append(line)
    if language is not None:
        blocks.append((language, "\n".join(buffer)))
    return blocks


def _extract_solution_path(text: str) -> str:
    start = text.find(_SOLUTION_OPEN)
    if start == -1:
        return ""
    end = text.find(_SOLUTION_CLOSE, start + len(_SOLUTION_OPEN))
    if end == -1:
        return ""
    return text[start + len(_SOLUTION_OPEN):end].strip()


def extract_code_block(text: str) -> str:
    """Content of the last code-tagged fenced block; raises NoCodeBlock when absent."""
    candidates = [content for lang, content in iter_fenced_blocks(text) if lang in _CODE_LANGS]
    if not candidates:
        raise NoCodeBlock("completion contains no python/code fenced block")
    return candidates[-1]


def extract_artifacts(text: str) -> ModelingArtifacts:
    """Pull the solution narrative, model text, and code out of a completion.

    The solution path is the first tag pair, the model text is the first
    ``model`` fence, and the code is the last code-tagged fence (later blocks
    supersede earlier ones). Only the code block is mandatory.
    """
    blocks = iter_fenced_blocks(text)
    model_text = next((content for lang, content in blocks if lang == _MODEL_LANG), "")
    code_candidates = [content for lang, content in blocks if lang in _CODE_LANGS]
    if not code_candidates:
        raise NoCodeBlock("completion contains no python/code fenced block")
    return ModelingArtifacts(
        solution_path=_extract_solution_path(text),
        model_text=model_text,
        code_text=code_candidates[-1],
    )


def validate_artifacts(artifacts: ModelingArtifacts) -> tuple[str, ...]:
    """Non-blocking artifact checks; returns human-readable defect tags."""
    defects: list[str] = []
    if not artifacts.model_text.strip():
        defects.append("missing model")
    else:
        try:
            parse_model_sections(artifacts.model_text)
        except MalformedModel:
            defects.append("model text unparseable")
    if not re.search(r"\bdef\s+\w+", artifacts.code_text):
        defects.append("no function definition")
    if not re.search(r"\breturn\b", artifacts.code_text):
        defects.append("no return contract")
    return tuple(defects)


# ---------------------------------------------------------------------------
# agent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelingResult:
    artifacts: ModelingArtifacts
    defects: tuple[str, ...]
    usage: TokenUsage
    prompt: str
    completion_text: str


class ModelAgent:
    """Turns a problem description into modeling artifacts via one completion."""

    def __init__(
        self,
        gateway: LLMGateway,
        model: str,
        temperature: float = 0.0,
        variant: PromptVariant = PromptVariant(),
        max_tokens: int | None = None,
        template_dir: Path | str | None = None,
    ) -> None:
        self.gateway = gateway
        self.model = model
        self.temperature = temperature
        self.variant = variant
        self.max_tokens = max_tokens
        self.template_dir = template_dir

    def request_for(self, problem: ProblemInstance, seed_tag: str = "") -> CompletionRequest:
        prompt = build_model_prompt(problem.description, self.variant, self.template_dir)
        return CompletionRequest(
            model=self.model,
            messages=(("user", prompt),),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            seed_tag=seed_tag,
        )

    def run(self, problem: ProblemInstance, seed_tag: str = "") -> ModelingResult:
        request = self.request_for(problem, seed_tag)
        completion = self.gateway.complete(request)
        try:
            artifacts = extract_artifacts(completion.text)
        except NoCodeBlock as err:
            err.usage = completion.usage
            raise
        return ModelingResult(
            artifacts=artifacts,
            defects=validate_artifacts(artifacts),
            usage=completion.usage,
            prompt=request.messages[0][1],
            completion_text=completion.text,
        )
