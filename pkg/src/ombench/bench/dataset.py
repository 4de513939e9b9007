"""Benchmark dataset layout: a manifest of annotations plus one description file per problem."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..core import (
    Annotation,
    OMBenchError,
    ProblemInstance,
    ProblemType,
    SizeClass,
    SizeDetails,
    classify_size,
)


class ManifestMalformed(OMBenchError):
    """manifest.json is missing, unparseable, or structurally invalid."""


class MissingDescription(OMBenchError):
    """A manifest entry has no matching problem description file."""


def _is_finite_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


@dataclass(frozen=True)
class Dataset:
    name: str
    problems: tuple[ProblemInstance, ...]
    source_path: Path
    flags: tuple[str, ...] = ()


def _parse_annotation(problem_id: str, entry: dict, flags: list[str]) -> Annotation:
    if "ground_truth" not in entry:
        raise ManifestMalformed(f"manifest entry {problem_id!r} lacks ground_truth")
    problem_type: ProblemType | None = None
    type_tag = entry.get("problem_type")
    if type_tag is not None:
        try:
            problem_type = ProblemType.from_tag(str(type_tag))
        except ValueError:
            flags.append(f"{problem_id}: unknown problem_type tag {type_tag!r}")
    problem_size: SizeClass | None = None
    size_tag = entry.get("problem_size")
    if size_tag is not None:
        try:
            problem_size = SizeClass.from_tag(str(size_tag))
        except ValueError:
            flags.append(f"{problem_id}: unknown problem_size tag {size_tag!r}")
    details: SizeDetails | None = None
    details_entry = entry.get("details")
    if details_entry is not None:
        try:
            details = SizeDetails(
                variables_num=details_entry["variables_num"],
                constraints_num=details_entry["constraints_num"],
                nonzeros_num=details_entry["nonzeros_num"],
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ManifestMalformed(f"manifest entry {problem_id!r} has bad details: {err}") from err
    try:
        annotation = Annotation(
            ground_truth=entry["ground_truth"],
            problem_type=problem_type,
            problem_size=problem_size,
            details=details,
        )
    except ValueError as err:
        raise ManifestMalformed(f"manifest entry {problem_id!r}: {err}") from err
    if details is not None and problem_size is not None:
        computed = classify_size(details)
        if computed is not problem_size:
            flags.append(
                f"{problem_id}: size tag {problem_size.value} disagrees with "
                f"computed {computed.value} from details"
            )
    return annotation


def load_dataset(root: Path | str) -> Dataset:
    """Load a dataset directory: ``manifest.json`` plus ``problems/<id>.txt`` files.

    Structural problems (bad JSON, bad entries, missing description files)
    raise; per-problem consistency issues are collected into ``flags`` without
    aborting the load. Problems come back sorted by id.
    """
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ManifestMalformed(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ManifestMalformed(f"manifest.json is not valid JSON: {err}") from err
    if not isinstance(manifest, dict):
        raise ManifestMalformed("manifest.json must be an object mapping problem ids to entries")
    for problem_id, entry in manifest.items():
        if not isinstance(entry, dict):
            raise ManifestMalformed(f"manifest entry {problem_id!r} must be an object")
        if not _is_finite_number(entry.get("ground_truth")):
            raise ManifestMalformed(
                f"manifest entry {problem_id!r} lacks a finite ground_truth"
            )

    flags: list[str] = []
    problems: list[ProblemInstance] = []
    problems_dir = root / "problems"
    for problem_id in sorted(manifest):
        description_path = problems_dir / f"{problem_id}.txt"
        if not description_path.exists():
            raise MissingDescription(f"no description file for {problem_id!r} at {description_path}")
        annotation = _parse_annotation(problem_id, manifest[problem_id], flags)
        problems.append(
            ProblemInstance(
                problem_id=problem_id,
                description=description_path.read_text(encoding="utf-8"),
                annotation=annotation,
                dataset=root.name,
            )
        )

    if problems_dir.is_dir():
        for orphan in sorted(problems_dir.glob("*.txt")):
            if orphan.stem not in manifest:
                flags.append(f"{orphan.stem}: description file has no manifest entry")

    return Dataset(
        name=root.name, problems=tuple(problems), source_path=root, flags=tuple(flags)
    )
