"""Seed corpus loading and validation.

A corpus is a JSONL file of algorithm problems.  Each record needs a
``title``, a ``statement`` and a ``reference_solution``; ``problem_id``,
``difficulty`` and ``source_tag`` are optional.  Records that fail
validation are reported (and skipped in permissive mode); duplicate
``problem_id`` values are a corpus-level violation that names the
source tags of both records involved.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any

from .errors import ReasonForgeError

DIFFICULTIES = ("easy", "medium", "hard", "unknown")

_REQUIRED = ("title", "statement", "reference_solution")


class CorpusError(ReasonForgeError):
    """Raised in strict mode for any record- or corpus-level violation."""


@dataclass(frozen=True)
class SeedProblem:
    problem_id: str
    title: str
    statement: str
    reference_solution: str
    difficulty: str = "unknown"
    source_tag: str = ""


@dataclass(frozen=True)
class CorpusIssue:
    line_no: int
    reason: str
    message: str


@dataclass
class CorpusLoadResult:
    seeds: list[SeedProblem] = field(default_factory=list)
    issues: list[CorpusIssue] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.seeds)


def derive_problem_id(title: str, statement: str) -> str:
    digest = hashlib.sha1(f"{title}\x1f{statement}".encode("utf-8")).hexdigest()
    return "p" + digest[:12]


def validate_seed(seed: SeedProblem) -> list[str]:
    """Record-level checks; returns human-readable violation messages."""
    problems: list[str] = []
    for name in _REQUIRED:
        if not str(getattr(seed, name)).strip():
            problems.append(f"empty {name}")
    if seed.difficulty not in DIFFICULTIES:
        problems.append(f"unknown difficulty {seed.difficulty!r}")
    if not seed.problem_id.strip():
        problems.append("empty problem_id")
    return problems


def seed_to_record(seed: SeedProblem) -> dict[str, Any]:
    return {
        "problem_id": seed.problem_id,
        "title": seed.title,
        "statement": seed.statement,
        "reference_solution": seed.reference_solution,
        "difficulty": seed.difficulty,
        "source_tag": seed.source_tag,
    }


def seed_from_record(record: dict[str, Any]) -> SeedProblem:
    title = str(record.get("title", ""))
    statement = str(record.get("statement", ""))
    seed = SeedProblem(
        problem_id=str(record.get("problem_id", "")) or derive_problem_id(title, statement),
        title=title,
        statement=statement,
        reference_solution=str(record.get("reference_solution", "")),
        difficulty=str(record.get("difficulty", "unknown")),
        source_tag=str(record.get("source_tag", "")),
    )
    return seed


def load_seeds(path: str, strict: bool = False) -> CorpusLoadResult:
    """Load and validate a JSONL corpus.

    Permissive mode collects issues and returns the valid seeds; strict
    mode raises CorpusError at the first violation.  An unreadable file
    always raises.
    """
    result = CorpusLoadResult()
    seen: dict[str, tuple[int, str]] = {}  # problem_id -> (line_no, source_tag)

    def issue(line_no: int, reason: str, message: str) -> None:
        if strict:
            raise CorpusError(f"line {line_no}: {message}")
        result.issues.append(CorpusIssue(line_no, reason, message))

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                issue(line_no, "invalid json", f"invalid json: {exc.msg}")
                continue
            if not isinstance(record, dict):
                issue(line_no, "invalid record", "record is not an object")
                continue
            seed = seed_from_record(record)
            violations = validate_seed(seed)
            if violations:
                issue(line_no, "invalid record", "; ".join(violations))
                continue
            if seed.problem_id in seen:
                first_line, first_tag = seen[seed.problem_id]
                issue(
                    line_no,
                    "duplicate problem_id",
                    f"duplicate problem_id {seed.problem_id!r}: "
                    f"line {first_line} (source_tag={first_tag!r}) vs "
                    f"line {line_no} (source_tag={seed.source_tag!r})",
                )
                continue
            seen[seed.problem_id] = (line_no, seed.source_tag)
            result.seeds.append(seed)
    return result


def normalize_difficulty(seed: SeedProblem) -> SeedProblem:
    if seed.difficulty in DIFFICULTIES:
        return seed
    return replace(seed, difficulty="unknown")
