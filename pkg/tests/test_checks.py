import pytest

from reasonforge.checks import (
    CATEGORY_1,
    CATEGORY_2,
    Verdict,
    consistency_check,
    execution_check,
    is_retryable,
    parse_verdict_line,
    solvability_check,
)
from reasonforge.gateway import Gateway, MockEntry, MockProvider, load_asset
from reasonforge.problems import ReasoningProblem
from reasonforge.tracing import ExecutionRecord, ParsedTrace


def make_rp():
    return ReasoningProblem(
        rp_id="rp-x",
        problem_id="p1",
        case_id="c1",
        text="A staircase of 10 steps.",
        background_theme="a tower",
    )


def make_record(exit_class="ok"):
    return ExecutionRecord(
        code_id="rp-x#a0",
        exit_class=exit_class,
        stdout_text="",
        stderr_text="",
        duration_ms=3,
    )


def judge_gateway(responses):
    entries = [MockEntry(role="judge", responses=tuple(responses))]
    return Gateway({"*": MockProvider(entries)})


class TestParseVerdictLine:
    def test_yes(self):
        assert parse_verdict_line("Reasoning...\nVERDICT: YES") is True

    def test_no(self):
        assert parse_verdict_line("VERDICT: NO") is False

    def test_last_verdict_wins(self):
        assert parse_verdict_line("VERDICT: NO\nSecond thoughts.\nVERDICT: YES") is True

    def test_case_insensitive(self):
        assert parse_verdict_line("verdict: yes") is True

    def test_absent(self):
        assert parse_verdict_line("I think it is fine.") is None

    def test_malformed_value(self):
        assert parse_verdict_line("VERDICT: MAYBE") is None

    def test_must_own_its_line(self):
        assert parse_verdict_line("not a VERDICT: YES result") is None


class TestJudgeChecks:
    def test_solvable_pass(self):
        gw = judge_gateway(["Looks good.\nVERDICT: YES"])
        rp = make_rp()
        v = solvability_check(rp, gw, load_asset("solvability_check"))
        assert v.passed
        assert v.check_kind == "solvability"
        assert rp.solvable == "pass"

    def test_solvable_fail(self):
        gw = judge_gateway(["VERDICT: NO"])
        rp = make_rp()
        v = solvability_check(rp, gw, load_asset("solvability_check"))
        assert not v.passed
        assert v.reason == "judged unsolvable"
        assert rp.solvable == "fail"

    def test_unparseable_then_parseable(self):
        gw = judge_gateway(["hmm, unclear", "VERDICT: YES"])
        v = solvability_check(make_rp(), gw, load_asset("solvability_check"), judge_resamples=1)
        assert v.passed

    def test_unparseable_exhausted_fails_closed(self):
        gw = judge_gateway(["hmm", "still hmm"])
        v = solvability_check(make_rp(), gw, load_asset("solvability_check"), judge_resamples=1)
        assert not v.passed
        assert v.reason == "judge unparseable"

    def test_consistency_fail_reason(self):
        gw = judge_gateway(["VERDICT: NO"])
        rp = make_rp()
        v = consistency_check(rp, "print(1)", gw, load_asset("consistency_check"))
        assert v.reason == "judged inconsistent"
        assert v.check_kind == "consistency"
        assert rp.consistent == "fail"

    def test_judge_raw_kept_for_audit(self):
        gw = judge_gateway(["Because reasons.\nVERDICT: NO"])
        v = solvability_check(make_rp(), gw, load_asset("solvability_check"))
        assert "Because reasons." in v.judge_raw


class TestExecutionCheck:
    def test_clean_pass(self):
        trace = ParsedTrace(intermediates=("step 1",), gold_answer="89")
        v = execution_check(make_record(), trace, resamples_used=0)
        assert v.passed
        assert v.check_kind == "execution"

    def test_nonzero_exit_retryable_before_limit(self):
        trace = ParsedTrace(intermediates=(), gold_answer=None)
        v = execution_check(make_record("nonzero_exit"), trace, resamples_used=1)
        assert not v.passed
        assert is_retryable(v)

    def test_hard_failure_at_limit_is_category_1(self):
        trace = ParsedTrace(intermediates=(), gold_answer=None)
        v = execution_check(make_record("nonzero_exit"), trace, resamples_used=3)
        assert v.reason == CATEGORY_1
        assert not is_retryable(v)

    def test_missing_gold_answer_counts_as_hard(self):
        trace = ParsedTrace(intermediates=("fine line",), gold_answer=None)
        v = execution_check(make_record("ok"), trace, resamples_used=3)
        assert v.reason == CATEGORY_1

    def test_empty_gold_answer_counts_as_hard(self):
        trace = ParsedTrace(intermediates=(), gold_answer="")
        v = execution_check(make_record("ok"), trace, resamples_used=0)
        assert is_retryable(v)

    def test_timeout_is_hard(self):
        trace = ParsedTrace(intermediates=(), gold_answer="89")
        v = execution_check(make_record("timeout"), trace, resamples_used=3)
        assert v.reason == CATEGORY_1

    def test_masked_error_is_category_2(self):
        trace = ParsedTrace(
            intermediates=("recovered from Traceback (most recent call last)",),
            gold_answer="89",
        )
        v = execution_check(make_record(), trace, resamples_used=0)
        assert v.reason == CATEGORY_2
        assert not is_retryable(v)

    @pytest.mark.parametrize(
        "marker", ["Traceback", "Exception", "Error:", "errno", "stack trace"]
    )
    def test_all_default_markers(self, marker):
        trace = ParsedTrace(intermediates=(f"line with {marker} inside",), gold_answer="1")
        v = execution_check(make_record(), trace, resamples_used=0)
        assert v.reason == CATEGORY_2

    def test_marker_match_case_sensitive(self):
        # "traceback" lowercase is prose, not the "Traceback" marker
        trace = ParsedTrace(intermediates=("traceback in prose",), gold_answer="1")
        v = execution_check(make_record(), trace, resamples_used=0)
        assert v.passed

    def test_custom_markers(self):
        trace = ParsedTrace(intermediates=("PANIC: oh no",), gold_answer="1")
        v = execution_check(make_record(), trace, resamples_used=0, error_markers=("PANIC",))
        assert v.reason == CATEGORY_2


class TestVerdict:
    def test_fail_requires_reason(self):
        with pytest.raises(ValueError):
            Verdict(subject_id="x", check_kind="execution", passed=False, reason="")

    def test_retryable_prefix(self):
        v = Verdict(subject_id="x", check_kind="execution", passed=False,
                    reason="retryable: hard failure")
        assert is_retryable(v)
        ok = Verdict(subject_id="x", check_kind="execution", passed=True)
        assert not is_retryable(ok)
