"""Quality filters: solvability judge, consistency judge, execution check.

Judge completions must end with a ``VERDICT: YES`` / ``VERDICT: NO``
line; the last matching line wins, and an unparseable judgment is
resampled once before failing closed.  The execution check is pure and
total over (execution record, parsed trace, resample budget).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .gateway import CompletionRequest, Gateway, PromptAsset, render
from .problems import ReasoningProblem
from .tracing import ExecutionRecord, ParsedTrace

DEFAULT_ERROR_MARKERS = ("Traceback", "Exception", "Error:", "errno", "stack trace")

_VERDICT_RE = re.compile(r"^\s*VERDICT:\s*(YES|NO)\s*$", re.IGNORECASE | re.MULTILINE)

_RETRYABLE_PREFIX = "retryable:"

CATEGORY_1 = "category 1: hard failure"
CATEGORY_2 = "category 2: masked error in trace"


@dataclass(frozen=True)
class Verdict:
    subject_id: str
    check_kind: str  # solvability | consistency | execution
    passed: bool
    reason: str = ""
    judge_raw: str = ""

    def __post_init__(self) -> None:
        if not self.passed and not self.reason:
            raise ValueError("failing verdicts must carry a reason")


def parse_verdict_line(text: str) -> bool | None:
    """Return True/False for the last VERDICT line, None if absent."""
    matches = _VERDICT_RE.findall(text)
    if not matches:
        return None
    return matches[-1].upper() == "YES"


def is_retryable(verdict: Verdict) -> bool:
    return not verdict.passed and verdict.reason.startswith(_RETRYABLE_PREFIX)


def _judged_verdict(
    gateway: Gateway,
    prompt: str,
    subject_id: str,
    check_kind: str,
    fail_reason: str,
    judge_resamples: int,
) -> Verdict:
    raw = ""
    for _ in range(judge_resamples + 1):
        completion = gateway.complete(
            CompletionRequest(prompt=prompt, model_role="judge")
        )
        raw = completion.text
        parsed = parse_verdict_line(raw)
        if parsed is not None:
            return Verdict(
                subject_id=subject_id,
                check_kind=check_kind,
                passed=parsed,
                reason="" if parsed else fail_reason,
                judge_raw=raw,
            )
    # fail closed: an unreadable judge is a rejection, not a pass
    return Verdict(
        subject_id=subject_id,
        check_kind=check_kind,
        passed=False,
        reason="judge unparseable",
        judge_raw=raw,
    )


def solvability_check(
    rp: ReasoningProblem,
    gateway: Gateway,
    asset: PromptAsset,
    judge_resamples: int = 1,
) -> Verdict:
    prompt = render(asset, {"problem_text": rp.text})
    verdict = _judged_verdict(
        gateway, prompt, rp.rp_id, "solvability", "judged unsolvable", judge_resamples
    )
    rp.solvable = "pass" if verdict.passed else "fail"
    return verdict


def consistency_check(
    rp: ReasoningProblem,
    code_text: str,
    gateway: Gateway,
    asset: PromptAsset,
    judge_resamples: int = 1,
) -> Verdict:
    prompt = render(asset, {"problem_text": rp.text, "code": code_text})
    verdict = _judged_verdict(
        gateway, prompt, rp.rp_id, "consistency", "judged inconsistent", judge_resamples
    )
    rp.consistent = "pass" if verdict.passed else "fail"
    return verdict


def execution_check(
    record: ExecutionRecord,
    trace: ParsedTrace,
    resamples_used: int,
    resample_limit: int = 3,
    error_markers: tuple[str, ...] = DEFAULT_ERROR_MARKERS,
) -> Verdict:
    """Classify an executed program.

    Category 1 (hard failure): non-ok exit or missing/empty result line
    - final only once the resample budget is spent, otherwise flagged
    retryable so the caller can re-instrument.  Category 2 (masked
    error): the run looks clean but an error marker appears among the
    intermediate lines, which means the program swallowed a fault.
    """
    hard_failure = record.exit_class != "ok" or not trace.gold_answer
    if hard_failure:
        if resamples_used >= resample_limit:
            return Verdict(record.code_id, "execution", False, CATEGORY_1)
        return Verdict(
            record.code_id, "execution", False, f"{_RETRYABLE_PREFIX} hard failure"
        )
    for line in trace.intermediates:
        for marker in error_markers:
            if marker in line:
                return Verdict(record.code_id, "execution", False, CATEGORY_2)
    return Verdict(record.code_id, "execution", True)
