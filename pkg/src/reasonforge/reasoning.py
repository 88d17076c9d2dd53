"""Program-guided reasoning synthesis and answer validation.

The reasoner writes a step-by-step solution for the reasoning problem,
guided by the executed program's intermediate values, and must end with
a ``Final answer: <value>`` line that matches the verified gold answer
after normalization.  Candidates that copy too many trace lines
verbatim are rejected (the trace is scaffolding, not the target text).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Any

from .errors import ItemRejected
from .gateway import CompletionRequest, Gateway, PromptAsset, render
from .problems import ReasoningProblem
from .tracing import InstrumentedCode, ParsedTrace
from .values import normalize_answer

DEFAULT_LEAKAGE_THRESHOLD = 2
DEFAULT_REASONING_RESAMPLES = 2

_FINAL_ANSWER_RE = re.compile(r"^\s*final answer:\s*(.+?)\s*$", re.IGNORECASE | re.MULTILINE)


@dataclass
class ReasoningPair:
    pair_id: str
    input_text: str
    output_text: str
    gold_answer: str
    provenance: dict[str, Any] = field(default_factory=dict)


def make_pair_id(rp_id: str, code_id: str) -> str:
    digest = hashlib.sha1(f"{rp_id}|{code_id}".encode("utf-8")).hexdigest()
    return "pair-" + digest[:12]


def extract_final_answer(text: str) -> str | None:
    """The payload of the last ``Final answer:`` line, or the trailing
    token of the last non-empty line as a fallback, or None for empty
    text."""
    matches = _FINAL_ANSWER_RE.findall(text)
    if matches:
        return matches[-1]
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        return None
    tokens = lines[-1].split()
    return tokens[-1].rstrip(".,;:!") if tokens else None


def count_trace_leakage(candidate: str, intermediates: list[str]) -> int:
    """Number of intermediate lines copied verbatim (after stripping)."""
    candidate_lines = {line.strip() for line in candidate.splitlines() if line.strip()}
    return sum(1 for line in intermediates if line.strip() and line.strip() in candidate_lines)


def validate_answer_consistency(candidate: str, gold_answer: str) -> tuple[bool, str]:
    """Accept iff the candidate's final answer normalizes to the gold
    answer.  Returns (accepted, reason)."""
    answer = extract_final_answer(candidate)
    if answer is None:
        return False, "answer mismatch"
    if normalize_answer(answer) != normalize_answer(gold_answer):
        return False, "answer mismatch"
    return True, ""


def synthesize_reasoning(
    rp: ReasoningProblem,
    trace: ParsedTrace,
    code: InstrumentedCode,
    gateway: Gateway,
    asset: PromptAsset,
    resample_limit: int = DEFAULT_REASONING_RESAMPLES,
    leakage_threshold: int = DEFAULT_LEAKAGE_THRESHOLD,
) -> ReasoningPair:
    """Produce an accepted ReasoningPair or raise ItemRejected with
    reason "answer mismatch" / "trace leakage" after the resample
    budget."""
    if not trace.gold_answer:
        raise ItemRejected("answer mismatch", "no gold answer available")
    prompt = render(
        asset,
        {
            "problem_text": rp.text,
            "intermediates": "\n".join(trace.intermediates) or "(no intermediate lines)",
            "gold_answer": trace.gold_answer,
        },
    )
    last_reason, last_detail = "answer mismatch", "no candidate produced"
    for _ in range(resample_limit + 1):
        completion = gateway.complete(
            CompletionRequest(prompt=prompt, model_role="reasoner")
        )
        candidate = completion.text.strip()
        accepted, reason = validate_answer_consistency(candidate, trace.gold_answer)
        if not accepted:
            last_reason, last_detail = reason, f"gold={trace.gold_answer!r}"
            continue
        leaked = count_trace_leakage(candidate, trace.intermediates)
        if leaked > leakage_threshold:
            last_reason, last_detail = "trace leakage", f"{leaked} lines copied"
            continue
        return ReasoningPair(
            pair_id=make_pair_id(rp.rp_id, code.code_id),
            input_text=rp.text,
            output_text=candidate,
            gold_answer=trace.gold_answer,
            provenance={
                "problem_id": rp.problem_id,
                "case_id": rp.case_id,
                "rp_id": rp.rp_id,
                "code_id": code.code_id,
                "attempt": code.attempt,
            },
        )
    raise ItemRejected(last_reason, last_detail)
