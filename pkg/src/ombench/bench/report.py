"""Aggregates trial records into grouped success/cost tables.

Reports can be grouped along any combination of dimensions (dataset,
problem_type, problem_size, variant) and emitted as an aligned text table,
canonical CSV (stable under emit -> parse -> emit), or JSON.
"""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from ..core import OMBenchError
from .runner import TrialRecord


class EmptyInput(OMBenchError):
    """There are no records to aggregate."""


def _dim_dataset(record: TrialRecord) -> str:
    return record.dataset or "unknown"


def _dim_problem_type(record: TrialRecord) -> str:
    annotation = record.annotation
    if annotation is None or annotation.problem_type is None:
        return "unknown"
    return annotation.problem_type.value


def _dim_problem_size(record: TrialRecord) -> str:
    annotation = record.annotation
    if annotation is None or annotation.problem_size is None:
        return "unknown"
    return annotation.problem_size.value


def _dim_variant(record: TrialRecord) -> str:
    return record.variant_label


DIMENSIONS: dict[str, Callable[[TrialRecord], str]] = {
    "dataset": _dim_dataset,
    "problem_type": _dim_problem_type,
    "problem_size": _dim_problem_size,
    "variant": _dim_variant,
}

METRIC_COLUMNS = (
    "trials",
    "successes",
    "success_rate",
    "avg_prompt_tokens",
    "avg_completion_tokens",
    "avg_repair_iterations",
)


@dataclass(frozen=True)
class ReportRow:
    group: tuple[str, ...]
    trials: int
    successes: int
    success_rate: float
    avg_prompt_tokens: float
    avg_completion_tokens: float
    avg_repair_iterations: float


@dataclass(frozen=True)
class BenchmarkReport:
    group_by: tuple[str, ...]
    rows: tuple[ReportRow, ...]


def _row_for(group: tuple[str, ...], records: Sequence[TrialRecord]) -> ReportRow:
    trials = len(records)
    successes = sum(1 for r in records if r.success)
    repairs = sum(r.outcome.repair_iterations if r.outcome else 0 for r in records)
    prompt = sum(r.usage_total.prompt_tokens for r in records)
    completion = sum(r.usage_total.completion_tokens for r in records)
    return ReportRow(
        group=group,
        trials=trials,
        successes=successes,
        success_rate=successes / trials,
        avg_prompt_tokens=prompt / trials,
        avg_completion_tokens=completion / trials,
        avg_repair_iterations=repairs / trials,
    )


def aggregate(
    records: Iterable[TrialRecord], group_by: Sequence[str] = ("dataset",)
) -> BenchmarkReport:
    """Group records along the given dimensions and compute per-group metrics.

    Rows come back sorted lexicographically by group value. A record without
    a passing verdict — including one never judged — counts as a failure.
    """
    group_by = tuple(group_by)
    for dim in group_by:
        if dim not in DIMENSIONS:
            raise ValueError(
                f"unknown grouping dimension {dim!r}; expected one of {sorted(DIMENSIONS)}"
            )
    materialized = list(records)
    if not materialized:
        raise EmptyInput("no records to aggregate")
    buckets: dict[tuple[str, ...], list[TrialRecord]] = defaultdict(list)
    for record in materialized:
        key = tuple(DIMENSIONS[dim](record) for dim in group_by)
        buckets[key].append(record)
    rows = tuple(_row_for(group, bucket) for group, bucket in sorted(buckets.items()))
    return BenchmarkReport(group_by=group_by, rows=rows)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _fmt_rate(rate: float) -> str:
    return f"{rate * 100:.2f}%"


def _fmt_avg(value: float) -> str:
    return f"{value:.2f}"


def _formatted_cells(row: ReportRow) -> list[str]:
    return [
        str(row.trials),
        str(row.successes),
        _fmt_rate(row.success_rate),
        _fmt_avg(row.avg_prompt_tokens),
        _fmt_avg(row.avg_completion_tokens),
        _fmt_avg(row.avg_repair_iterations),
    ]


def emit_table(report: BenchmarkReport) -> str:
    header = list(report.group_by) + list(METRIC_COLUMNS)
    body = [list(row.group) + _formatted_cells(row) for row in report.rows]
    widths = [
        max(len(header[i]), *(len(line[i]) for line in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    def render(cells: list[str]) -> str:
        return "  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip()

    lines = [render(header), render(["-" * w for w in widths])]
    lines.extend(render(line) for line in body)
    return "\n".join(lines) + "\n"


def emit_csv(report: BenchmarkReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(list(report.group_by) + list(METRIC_COLUMNS))
    for row in report.rows:
        writer.writerow(list(row.group) + _formatted_cells(row))
    return buffer.getvalue()


def load_report_csv(text: str) -> BenchmarkReport:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise EmptyInput("empty report CSV")
    header = rows[0]
    if "trials" not in header:
        raise ValueError("report CSV is missing the 'trials' column")
    split = header.index("trials")
    group_by = tuple(header[:split])
    if tuple(header[split:]) != METRIC_COLUMNS:
        raise ValueError(f"unexpected report CSV columns: {header[split:]!r}")
    parsed = []
    for cells in rows[1:]:
        group = tuple(cells[:split])
        trials, successes, rate, prompt, completion, repairs = cells[split:]
        parsed.append(
            ReportRow(
                group=group,
                trials=int(trials),
                successes=int(successes),
                success_rate=float(rate.rstrip("%")) / 100.0,
                avg_prompt_tokens=float(prompt),
                avg_completion_tokens=float(completion),
                avg_repair_iterations=float(repairs),
            )
        )
    return BenchmarkReport(group_by=group_by, rows=tuple(parsed))


def emit_json(report: BenchmarkReport) -> str:
    payload = {
        "group_by": list(report.group_by),
        "rows": [
            {
                "group": dict(zip(report.group_by, row.group)),
                "trials": row.trials,
                "successes": row.successes,
                "success_rate": row.success_rate,
                "avg_prompt_tokens": row.avg_prompt_tokens,
                "avg_completion_tokens": row.avg_completion_tokens,
                "avg_repair_iterations": row.avg_repair_iterations,
            }
            for row in report.rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


REPORT_FORMATS = ("table", "csv", "json")


def emit_report(report: BenchmarkReport, fmt: str) -> str:
    if fmt == "table":
        return emit_table(report)
    if fmt == "csv":
        return emit_csv(report)
    if fmt == "json":
        return emit_json(report)
    raise ValueError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")
