"""Synthesis of natural-language reasoning problems from (problem, case).

Each curated test case is rewritten into a self-contained story problem
set in a deterministically chosen background theme.  The synthesizer
must embed every concrete input value and must not emit code fences;
violations are resampled once and then rejected.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from . import values
from .casegen import TestCase
from .corpus import SeedProblem
from .errors import ItemRejected
from .gateway import CompletionRequest, Gateway, PromptAsset, render

DEFAULT_THEMES = (
    "a bakery preparing daily orders",
    "a mountain expedition planning supplies",
    "a library reorganizing its shelves",
    "a space station managing oxygen cycles",
    "a farmers market tracking stalls",
    "a railway dispatcher scheduling trains",
    "a coral reef research dive",
    "a medieval castle provisioning for winter",
    "a robotics club preparing a competition",
    "a lighthouse keeper logging ships",
    "a vineyard planning the harvest",
    "a chess club organizing a tournament",
    "a city park planting flower beds",
    "an aquarium feeding schedule",
    "a teahouse blending new recipes",
    "a mushroom foraging trip",
    "a print shop queuing orders",
    "an observatory tracking meteor showers",
    "a ski resort grooming slopes",
    "a puppet theater rehearsing scenes",
    "a beekeeper inspecting hives",
    "a submarine crew rationing meals",
    "a desert caravan plotting waypoints",
    "an orchard sorting the day's picking",
)

_CODE_FENCE = "```"


@dataclass
class ReasoningProblem:
    rp_id: str
    problem_id: str
    case_id: str
    text: str
    background_theme: str
    solvable: str = "unchecked"  # unchecked | pass | fail
    consistent: str = "unchecked"


def make_rp_id(problem_id: str, case_id: str) -> str:
    digest = hashlib.sha1(f"{problem_id}|{case_id}".encode("utf-8")).hexdigest()
    return "rp-" + digest[:12]


def pick_theme(
    seed: int,
    problem_id: str,
    case_id: str,
    themes: tuple[str, ...] = DEFAULT_THEMES,
) -> str:
    """Seeded random theme per case, independent of processing order."""
    if not themes:
        raise ValueError("theme pool is empty")
    digest = hashlib.sha256(f"{seed}:{problem_id}:{case_id}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    return rng.choice(list(themes))


def check_problem_text(text: str, case: TestCase) -> list[str]:
    """Mechanical gate run before any judging: no code fences, every
    input value embedded.  Returns violation descriptions."""
    violations: list[str] = []
    if _CODE_FENCE in text:
        violations.append("format: contains a code fence")
    parsed = values.parse_assignments(case.input_literal)
    missing = values.missing_values(text, parsed)
    if missing:
        violations.append("values missing: " + ", ".join(missing))
    return violations


def synthesize_problem(
    seed_problem: SeedProblem,
    case: TestCase,
    theme: str,
    gateway: Gateway,
    asset: PromptAsset,
    format_resamples: int = 1,
) -> ReasoningProblem:
    """Produce a ReasoningProblem or raise ItemRejected("format") /
    ItemRejected("values missing") after the resample budget."""
    prompt = render(
        asset,
        {
            "statement": seed_problem.statement,
            "input_literal": case.input_literal,
            "theme": theme,
        },
    )
    last_violations: list[str] = []
    for _ in range(format_resamples + 1):
        completion = gateway.complete(
            CompletionRequest(prompt=prompt, model_role="problem_synthesizer")
        )
        text = completion.text.strip()
        last_violations = check_problem_text(text, case)
        if not last_violations:
            return ReasoningProblem(
                rp_id=make_rp_id(case.problem_id, case.case_id),
                problem_id=case.problem_id,
                case_id=case.case_id,
                text=text,
                background_theme=theme,
            )
    reason = "format" if last_violations[0].startswith("format") else "values missing"
    raise ItemRejected(reason, "; ".join(last_violations))
