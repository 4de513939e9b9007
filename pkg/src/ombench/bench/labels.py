"""Manual failure labeling for benchmark trials.

After a run, a reviewer can attach labels to failed trials classifying what
went wrong: which kind of error (incorrect / missing / spurious) hit which
model element (variable, objective, constraint, parameter, or the code
itself). Labels live in an append-only ``labels.jsonl`` ledger next to the
run's records and roll up into a category-by-element count matrix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from ..core import OMBenchError
from .runner import record_from_dict


class LabelOnSuccess(OMBenchError):
    """Refused: the targeted trial succeeded, so there is no failure to label."""


class ErrorCategory(str, Enum):
    INCORRECT = "incorrect"
    MISSING = "missing"
    SPURIOUS = "spurious"


class ModelElement(str, Enum):
    VARIABLE = "variable"
    OBJECTIVE = "objective"
    CONSTRAINT = "constraint"
    PARAMETER = "parameter"
    CODE = "code"


@dataclass(frozen=True)
class FailureLabel:
    record_key: str
    error_category: ErrorCategory
    element: ModelElement
    note: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "error_category", ErrorCategory(self.error_category))
        object.__setattr__(self, "element", ModelElement(self.element))
        if not self.record_key:
            raise ValueError("record_key must be non-empty")


def _ledger_path(run_dir: Path) -> Path:
    return Path(run_dir) / "labels.jsonl"


def attach_label(run_dir: Path, label: FailureLabel) -> None:
    """Append a label to the run's ledger after checking the trial really failed."""
    run_dir = Path(run_dir)
    record_path = run_dir / "records" / f"{label.record_key}.json"
    if not record_path.exists():
        raise ValueError(f"no record {label.record_key!r} in run {run_dir}")
    record = record_from_dict(json.loads(record_path.read_text(encoding="utf-8")))
    if record.success:
        raise LabelOnSuccess(f"trial {label.record_key!r} succeeded; labels are for failures")
    entry = {
        "record_key": label.record_key,
        "error_category": label.error_category.value,
        "element": label.element.value,
        "note": label.note,
    }
    with _ledger_path(run_dir).open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(entry, sort_keys=True) + "\n")


def load_labels(run_dir: Path) -> tuple[FailureLabel, ...]:
    path = _ledger_path(Path(run_dir))
    if not path.exists():
        return ()
    labels = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        entry = json.loads(line)
        labels.append(
            FailureLabel(
                record_key=entry["record_key"],
                error_category=ErrorCategory(entry["error_category"]),
                element=ModelElement(entry["element"]),
                note=entry.get("note", ""),
            )
        )
    return tuple(labels)


@dataclass(frozen=True)
class LabelSummary:
    matrix: dict[tuple[ErrorCategory, ModelElement], int] = field(default_factory=dict)

    @property
    def category_totals(self) -> dict[ErrorCategory, int]:
        totals: dict[ErrorCategory, int] = {}
        for (category, _), count in self.matrix.items():
            totals[category] = totals.get(category, 0) + count
        return totals

    @property
    def element_totals(self) -> dict[ModelElement, int]:
        totals: dict[ModelElement, int] = {}
        for (_, element), count in self.matrix.items():
            totals[element] = totals.get(element, 0) + count
        return totals

    @property
    def total(self) -> int:
        return sum(self.matrix.values())


def summarize_labels(labels: Iterable[FailureLabel]) -> LabelSummary:
    matrix: dict[tuple[ErrorCategory, ModelElement], int] = {}
    for label in labels:
        cell = (label.error_category, label.element)
        matrix[cell] = matrix.get(cell, 0) + 1
    return LabelSummary(matrix=matrix)


def emit_label_matrix(summary: LabelSummary) -> str:
    """Render the category-by-element count matrix with row and column totals."""
    categories = list(ErrorCategory)
    elements = list(ModelElement)
    header = ["category"] + [e.value for e in elements] + ["total"]
    body = []
    for category in categories:
        cells = [summary.matrix.get((category, element), 0) for element in elements]
        body.append([category.value] + [str(c) for c in cells] + [str(sum(cells))])
    footer = (
        ["total"]
        + [str(summary.element_totals.get(element, 0)) for element in elements]
        + [str(summary.total)]
    )
    body.append(footer)
    widths = [max(len(header[i]), *(len(row[i]) for row in body)) for i in range(len(header))]

    def render(cells: list[str]) -> str:
        return "  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip()

    lines = [render(header), render(["-" * w for w in widths])]
    lines.extend(render(row) for row in body)
    return "\n".join(lines) + "\n"
