import pytest

from reasonforge.errors import ItemRejected
from reasonforge.gateway import Gateway, MockEntry, MockProvider, load_asset
from reasonforge.problems import ReasoningProblem
from reasonforge.reasoning import (
    count_trace_leakage,
    extract_final_answer,
    make_pair_id,
    synthesize_reasoning,
    validate_answer_consistency,
)
from reasonforge.tracing import InstrumentedCode, ParsedTrace

RP = ReasoningProblem(
    rp_id="rp-x",
    problem_id="p1",
    case_id="c1",
    text="A staircase of 10 steps.",
    background_theme="a tower",
)

CODE = InstrumentedCode(code_id="rp-x#a0", rp_id="rp-x", source_text="...", attempt=0)

TRACE = ParsedTrace(
    intermediates=["after step 1: ways = 1", "after step 2: ways = 2"],
    gold_answer="89",
)


def reasoner_gateway(responses):
    provider = MockProvider([MockEntry(role="reasoner", responses=tuple(responses))])
    return Gateway({"*": provider})


class TestExtractFinalAnswer:
    def test_final_answer_line(self):
        assert extract_final_answer("Steps...\nFinal answer: 89") == "89"

    def test_last_final_answer_wins(self):
        text = "Final answer: 1\nwait\nFinal answer: 2"
        assert extract_final_answer(text) == "2"

    def test_case_insensitive(self):
        assert extract_final_answer("final ANSWER: true") == "true"

    def test_fallback_trailing_token(self):
        assert extract_final_answer("So the result is 42.") == "42"

    def test_fallback_strips_punctuation(self):
        assert extract_final_answer("It equals 7;") == "7"

    def test_empty_text(self):
        assert extract_final_answer("") is None
        assert extract_final_answer("  \n \n") is None

    def test_multiword_payload_preserved(self):
        assert extract_final_answer("Final answer: [1, 2, 3]") == "[1, 2, 3]"


class TestCountTraceLeakage:
    def test_no_overlap(self):
        assert count_trace_leakage("fresh prose here", TRACE.intermediates) == 0

    def test_counts_verbatim_lines(self):
        candidate = "intro\nafter step 1: ways = 1\nafter step 2: ways = 2\nend"
        assert count_trace_leakage(candidate, TRACE.intermediates) == 2

    def test_whitespace_insensitive(self):
        candidate = "   after step 1: ways = 1   "
        assert count_trace_leakage(candidate, TRACE.intermediates) == 1

    def test_partial_line_not_counted(self):
        candidate = "after step 1: ways = 1 as computed"
        assert count_trace_leakage(candidate, TRACE.intermediates) == 0

    def test_blank_intermediates_ignored(self):
        assert count_trace_leakage("anything", ["", "  "]) == 0


class TestValidateAnswerConsistency:
    def test_exact_match(self):
        assert validate_answer_consistency("Final answer: 89", "89") == (True, "")

    def test_normalized_match(self):
        ok, _ = validate_answer_consistency("Final answer: True", "true")
        assert ok

    def test_numeric_normalization(self):
        ok, _ = validate_answer_consistency("Final answer: 89.0", "89")
        assert ok

    def test_mismatch(self):
        ok, reason = validate_answer_consistency("Final answer: 88", "89")
        assert not ok
        assert reason == "answer mismatch"

    def test_missing_answer_line_uses_fallback(self):
        ok, _ = validate_answer_consistency("The total is 89", "89")
        assert ok


class TestSynthesizeReasoning:
    def test_happy_path(self):
        gw = reasoner_gateway(["We climb carefully.\nFinal answer: 89"])
        pair = synthesize_reasoning(RP, TRACE, CODE, gw, load_asset("reasoning_synthesis"))
        assert pair.pair_id == make_pair_id("rp-x", "rp-x#a0")
        assert pair.input_text == RP.text
        assert pair.gold_answer == "89"
        assert pair.provenance == {
            "problem_id": "p1",
            "case_id": "c1",
            "rp_id": "rp-x",
            "code_id": "rp-x#a0",
            "attempt": 0,
        }

    def test_resample_after_mismatch(self):
        gw = reasoner_gateway(["Final answer: 12", "Final answer: 89"])
        pair = synthesize_reasoning(
            RP, TRACE, CODE, gw, load_asset("reasoning_synthesis"), resample_limit=1
        )
        assert "89" in pair.output_text

    def test_mismatch_exhausted(self):
        gw = reasoner_gateway(["Final answer: 1", "Final answer: 2"])
        with pytest.raises(ItemRejected) as exc:
            synthesize_reasoning(
                RP, TRACE, CODE, gw, load_asset("reasoning_synthesis"), resample_limit=1
            )
        assert exc.value.reason == "answer mismatch"

    def test_leakage_rejected(self):
        leaky = "\n".join(TRACE.intermediates + ["extra", "Final answer: 89"])
        gw = reasoner_gateway([leaky])
        with pytest.raises(ItemRejected) as exc:
            synthesize_reasoning(
                RP, TRACE, CODE, gw, load_asset("reasoning_synthesis"),
                resample_limit=0, leakage_threshold=1,
            )
        assert exc.value.reason == "trace leakage"

    def test_leakage_at_threshold_allowed(self):
        leaky = "\n".join(TRACE.intermediates + ["Final answer: 89"])
        gw = reasoner_gateway([leaky])
        pair = synthesize_reasoning(
            RP, TRACE, CODE, gw, load_asset("reasoning_synthesis"),
            resample_limit=0, leakage_threshold=2,
        )
        assert pair.gold_answer == "89"

    def test_missing_gold_rejected_without_calls(self):
        gw = reasoner_gateway(["should never be consumed"])
        bare = ParsedTrace(intermediates=[], gold_answer=None)
        with pytest.raises(ItemRejected) as exc:
            synthesize_reasoning(RP, bare, CODE, gw, load_asset("reasoning_synthesis"))
        assert exc.value.reason == "answer mismatch"


def test_make_pair_id_stable():
    assert make_pair_id("a", "b") == make_pair_id("a", "b")
    assert make_pair_id("a", "b") != make_pair_id("a", "c")
    assert make_pair_id("a", "b").startswith("pair-")
