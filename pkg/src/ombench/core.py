"""Core domain types: problems, annotations, success judgement, model-text parsing."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum


class OMBenchError(Exception):
    """Base class for errors raised by this package."""


class MalformedModel(OMBenchError):
    """Model text contains none of the recognized section headings."""


class ProblemType(str, Enum):
    LP = "LP"
    ILP = "ILP"
    MILP = "MILP"
    NLP = "NLP"

    @classmethod
    def from_tag(cls, tag: str) -> "ProblemType":
        """Parse a dataset tag, normalizing the legacy "NP" spelling to NLP."""
        normalized = tag.strip().upper()
        if normalized == "NP":
            return cls.NLP
        try:
            return cls(normalized)
        except ValueError:
            raise ValueError(f"unknown problem type tag: {tag!r}") from None


class SizeClass(str, Enum):
    TOY = "Toy"
    SMALL = "Small"
    MEDIUM = "Medium"

    @property
    def rank(self) -> int:
        return _SIZE_RANK[self]

    @classmethod
    def from_tag(cls, tag: str) -> "SizeClass":
        for member in cls:
            if member.value.lower() == tag.strip().lower():
                return member
        raise ValueError(f"unknown problem size tag: {tag!r}")


_SIZE_RANK = {SizeClass.TOY: 0, SizeClass.SMALL: 1, SizeClass.MEDIUM: 2}

# Strict upper bounds on (variables, constraints, nonzeros) for each class.
_TOY_LIMITS = (5, 10, 20)
_SMALL_LIMITS = (25, 40, 80)


@dataclass(frozen=True)
class SizeDetails:
    variables_num: int
    constraints_num: int
    nonzeros_num: int

    def __post_init__(self) -> None:
        for name in ("variables_num", "constraints_num", "nonzeros_num"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")


def classify_size(details: SizeDetails) -> SizeClass:
    """Classify instance size from its counts; a class requires all three counts below its bounds."""
    counts = (details.variables_num, details.constraints_num, details.nonzeros_num)
    if all(c < limit for c, limit in zip(counts, _TOY_LIMITS)):
        return SizeClass.TOY
    if all(c < limit for c, limit in zip(counts, _SMALL_LIMITS)):
        return SizeClass.SMALL
    return SizeClass.MEDIUM


@dataclass(frozen=True)
class Annotation:
    """Ground-truth annotation attached to a benchmark problem."""

    ground_truth: float
    problem_type: ProblemType | None = None
    problem_size: SizeClass | None = None
    details: SizeDetails | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.ground_truth, (int, float)) or not math.isfinite(self.ground_truth):
            raise ValueError(f"ground_truth must be finite, got {self.ground_truth!r}")


@dataclass(frozen=True)
class ProblemInstance:
    problem_id: str
    description: str
    annotation: Annotation | None = None
    dataset: str = ""

    def __post_init__(self) -> None:
        if not self.problem_id:
            raise ValueError("problem_id must be non-empty")


# ---------------------------------------------------------------------------
# Success judgement
# ---------------------------------------------------------------------------

DEFAULT_ABS_TOL = 1e-6
DEFAULT_REL_TOL = 1e-4


@dataclass(frozen=True)
class SuccessVerdict:
    success: bool
    achieved: float | None
    ground_truth: float
    abs_err: float | None
    rel_err: float | None
    abs_tol: float
    rel_tol: float
    reason: str | None = None


def evaluate_success(
    achieved: float | None,
    ground_truth: float,
    abs_tol: float = DEFAULT_ABS_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
) -> SuccessVerdict:
    """Judge an achieved objective against ground truth.

    Success iff |achieved - ground_truth| <= max(abs_tol, rel_tol * |ground_truth|).
    A missing or non-finite achieved value yields a failed verdict, never an exception.
    """
    if not isinstance(ground_truth, (int, float)) or not math.isfinite(ground_truth):
        raise ValueError(f"ground_truth must be finite, got {ground_truth!r}")
    ground_truth = float(ground_truth)

    def verdict(**kwargs: object) -> SuccessVerdict:
        return SuccessVerdict(
            ground_truth=ground_truth, abs_tol=abs_tol, rel_tol=rel_tol, **kwargs  # type: ignore[arg-type]
        )

    if achieved is None:
        return verdict(success=False, achieved=None, abs_err=None, rel_err=None,
                       reason="no objective value produced")
    achieved = float(achieved)
    if not math.isfinite(achieved):
        return verdict(success=False, achieved=achieved, abs_err=None, rel_err=None,
                       reason=f"objective value is not finite: {achieved!r}")

    abs_err = abs(achieved - ground_truth)
    rel_err = abs_err / abs(ground_truth) if ground_truth != 0.0 else None
    tolerance = max(abs_tol, rel_tol * abs(ground_truth))
    if abs_err <= tolerance:
        return verdict(success=True, achieved=achieved, abs_err=abs_err, rel_err=rel_err)
    return verdict(
        success=False, achieved=achieved, abs_err=abs_err, rel_err=rel_err,
        reason=f"objective {achieved!r} differs from ground truth {ground_truth!r} "
               f"by {abs_err!r} (tolerance {tolerance!r})",
    )


# ---------------------------------------------------------------------------
# Model-text section parsing
# ---------------------------------------------------------------------------

_SECTION_FIELDS = {
    "set": "sets",
    "parameter": "parameters",
    "decision variable": "decision_variables",
    "objective": "objective",
    "constraint": "constraints",
    "type": "type_tags",
}

_HEADING_RE = re.compile(
    r"^\s*(?:[#>*_]+\s*)?(set|parameter|decision variable|objective|constraint|type)s?\s*:\s*(?:[*_]+\s*)?$",
    re.IGNORECASE,
)
_ITEM_START_RE = re.compile(r"^\s*\d+\.(\s|$)")


@dataclass(frozen=True)
class ModelSections:
    """Model text split into its labeled sections.

    Items are verbatim text blocks (numbering included) whose lines are joined
    with "\\n". ``heading_lines`` keeps the verbatim heading lines in encounter
    order so that no input line is lost: preamble + headings + items jointly
    contain every input line exactly once.
    """

    sets: tuple[str, ...] = ()
    parameters: tuple[str, ...] = ()
    decision_variables: tuple[str, ...] = ()
    objective: tuple[str, ...] = ()
    constraints: tuple[str, ...] = ()
    type_tags: tuple[str, ...] = ()
    preamble: str = ""
    heading_lines: tuple[str, ...] = ()


def _split_items(lines: list[str]) -> list[str]:
    """Split a section body into numbered items; a non-numbered lead becomes its own item."""
    items: list[list[str]] = []
    lead: list[str] = []
    for line in lines:
        if _ITEM_START_RE.match(line):
            items.append([line])
        elif items:
            items[-1].append(line)
        else:
            lead.append(line)
    if lead:
        if any(line.strip() for line in lead) or not items:
            items.insert(0, lead)
        else:
            items[0][:0] = lead  # pure-whitespace lead sticks to the first item
    return ["\n".join(block) for block in items]


def parse_model_sections(text: str) -> ModelSections:
    """Group model text under its recognized section headings.

    Headings are matched case-insensitively with an optional plural "s"; text
    before the first heading lands in ``preamble``; text under an unrecognized
    label stays with the most recent section. Raises :class:`MalformedModel`
    when no heading is present at all.
    """
    preamble: list[str] = []
    heading_lines: list[str] = []
    bodies: dict[str, list[str]] = {name: [] for name in _SECTION_FIELDS.values()}
    segments: list[tuple[str, list[str]]] = []
    current: list[str] | None = None

    for line in text.splitlines():
        match = _HEADING_RE.match(line)
        if match:
            heading_lines.append(line)
            field_name = _SECTION_FIELDS[match.group(1).lower()]
            current = []
            segments.append((field_name, current))
        elif current is not None:
            current.append(line)
        else:
            preamble.append(line)

    if not heading_lines:
        raise MalformedModel("model text contains no recognized section heading")

    for field_name, body in segments:
        bodies[field_name].extend(_split_items(body))

    return ModelSections(
        sets=tuple(bodies["sets"]),
        parameters=tuple(bodies["parameters"]),
        decision_variables=tuple(bodies["decision_variables"]),
        objective=tuple(bodies["objective"]),
        constraints=tuple(bodies["constraints"]),
        type_tags=tuple(bodies["type_tags"]),
        preamble="".join(line + "\n" for line in preamble),
        heading_lines=tuple(heading_lines),
    )
