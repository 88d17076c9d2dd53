"""Test-case generation and curation.

For each seed problem the case generator is asked for ``per_batch``
cases, sampled ``samples`` times at high temperature; each completion
line of the form ``name=value, ...`` becomes one raw case.  Curation
merges batches, drops structural failures and duplicates (first
occurrence wins), and truncates to the per-problem cap.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from . import values
from .corpus import SeedProblem
from .gateway import CompletionRequest, Gateway, PromptAsset, render

DEFAULT_PER_BATCH = 150
DEFAULT_SAMPLES = 3
DEFAULT_CASE_CAP = 300
DEFAULT_MAX_LITERAL_BYTES = 2048

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


@dataclass
class TestCase:
    __test__ = False  # not a pytest class, despite the name

    case_id: str
    problem_id: str
    input_literal: str
    canonical_form_text: str
    batch_index: int
    status: str = "raw"  # raw | curated | rejected
    reject_reason: str = ""


@dataclass
class CaseGenResult:
    cases: list[TestCase] = field(default_factory=list)
    parse_failures: int = 0


@dataclass
class CurationResult:
    curated: list[TestCase] = field(default_factory=list)
    rejected: list[TestCase] = field(default_factory=list)


def make_case_id(problem_id: str, batch_index: int, position: int) -> str:
    return f"{problem_id}:c{batch_index}:{position:03d}"


def parse_case_entries(completion_text: str) -> tuple[list[str], int]:
    """Extract case entry literals from one completion.

    Fenced blocks contribute their non-empty lines; outside fences,
    any line containing ``=`` counts as a case entry (prose lines
    without ``=`` are ignored).  Returns (entries, parse_failure_count)
    where entries are raw literal strings that parsed successfully.
    """
    entries: list[str] = []
    failures = 0
    body_parts: list[str] = []
    last = 0
    for match in _FENCE_RE.finditer(completion_text):
        body_parts.append(completion_text[last : match.start()])
        body_parts.append(match.group(1))
        last = match.end()
    body_parts.append(completion_text[last:])
    for line in "\n".join(body_parts).splitlines():
        candidate = line.strip()
        candidate = re.sub(r"^(?:[-*]\s+|\d+[.)]\s+)", "", candidate)
        if not candidate or "=" not in candidate:
            continue
        try:
            values.parse_assignments(candidate)
        except ValueError:
            failures += 1
            continue
        entries.append(candidate)
    return entries, failures


def generate_case_batches(
    problem: SeedProblem,
    gateway: Gateway,
    asset: PromptAsset,
    per_batch: int = DEFAULT_PER_BATCH,
    samples: int = DEFAULT_SAMPLES,
) -> CaseGenResult:
    """Sample the case generator and collect raw cases across batches."""
    prompt = render(
        asset,
        {
            "title": problem.title,
            "statement": problem.statement,
            "per_batch": per_batch,
        },
    )
    completion = gateway.complete(
        CompletionRequest(
            prompt=prompt,
            model_role="case_generator",
            sample_count=samples,
        )
    )
    result = CaseGenResult()
    for batch_index, text in enumerate(completion.texts):
        entries, failures = parse_case_entries(text)
        result.parse_failures += failures
        for position, literal in enumerate(entries):
            parsed = values.parse_assignments(literal)
            result.cases.append(
                TestCase(
                    case_id=make_case_id(problem.problem_id, batch_index, position),
                    problem_id=problem.problem_id,
                    input_literal=literal,
                    canonical_form_text=values.canonical_form(parsed),
                    batch_index=batch_index,
                )
            )
    return result


def curate_cases(
    raw_cases: list[TestCase],
    cap: int = DEFAULT_CASE_CAP,
    max_literal_bytes: int = DEFAULT_MAX_LITERAL_BYTES,
) -> CurationResult:
    """Merge, filter, dedupe and cap raw cases.

    Order is (batch_index, original position); the first occurrence of a
    canonical form wins.  Structural rejects carry stable reasons:
    "malformed literal", "no parameters", "oversize literal",
    "duplicate", "over cap".  Pure: inputs are not mutated, and
    curating an already-curated list returns it unchanged.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    result = CurationResult()
    seen: set[str] = set()
    ordered = sorted(
        enumerate(raw_cases), key=lambda pair: (pair[1].batch_index, pair[0])
    )

    def reject(case: TestCase, reason: str) -> None:
        result.rejected.append(replace(case, status="rejected", reject_reason=reason))

    for _, case in ordered:
        try:
            parsed = values.parse_assignments(case.input_literal)
        except ValueError:
            reject(case, "malformed literal")
            continue
        if not parsed:
            reject(case, "no parameters")
            continue
        if len(case.input_literal.encode("utf-8")) > max_literal_bytes:
            reject(case, "oversize literal")
            continue
        canonical = values.canonical_form(parsed)
        if canonical in seen:
            reject(case, "duplicate")
            continue
        if len(result.curated) >= cap:
            reject(case, "over cap")
            continue
        seen.add(canonical)
        result.curated.append(
            replace(case, canonical_form_text=canonical, status="curated", reject_reason="")
        )
    return result
