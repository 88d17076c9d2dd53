import pytest

from reasonforge.casegen import TestCase
from reasonforge.corpus import SeedProblem
from reasonforge.errors import ItemRejected
from reasonforge.gateway import Gateway, MockEntry, MockProvider, load_asset
from reasonforge.problems import (
    DEFAULT_THEMES,
    check_problem_text,
    make_rp_id,
    pick_theme,
    synthesize_problem,
)

SEED = SeedProblem(
    problem_id="p1",
    title="Stairs",
    statement="Count ways to climb n steps.",
    reference_solution="def f(n): ...",
)

CASE = TestCase(
    case_id="p1:c0:000",
    problem_id="p1",
    input_literal="n=10",
    canonical_form_text='{"n": 10}',
    batch_index=0,
)


def make_case(literal):
    return TestCase(
        case_id="p1:c0:000",
        problem_id="p1",
        input_literal=literal,
        canonical_form_text="",
        batch_index=0,
    )


def make_gateway(responses):
    provider = MockProvider(
        [MockEntry(role="problem_synthesizer", responses=tuple(responses))]
    )
    return Gateway({"*": provider})


class TestPickTheme:
    def test_deterministic(self):
        assert pick_theme(7, "p1", "p1:c0:000") == pick_theme(7, "p1", "p1:c0:000")

    def test_member_of_pool(self):
        assert pick_theme(7, "p1", "p1:c0:000") in DEFAULT_THEMES

    def test_varies_with_case(self):
        themes = {pick_theme(7, "p1", f"p1:c0:{i:03d}") for i in range(40)}
        assert len(themes) > 1

    def test_seed_changes_selection_somewhere(self):
        assert any(
            pick_theme(0, "p1", f"c{i}") != pick_theme(1, "p1", f"c{i}")
            for i in range(40)
        )

    def test_pool_size(self):
        assert len(DEFAULT_THEMES) == 24
        assert len(set(DEFAULT_THEMES)) == 24

    def test_empty_pool_raises(self):
        with pytest.raises(ValueError):
            pick_theme(0, "p", "c", themes=())


class TestCheckProblemText:
    def test_ok(self):
        assert check_problem_text("A staircase with 10 steps.", CASE) == []

    def test_missing_value(self):
        violations = check_problem_text("A staircase.", CASE)
        assert len(violations) == 1
        assert violations[0].startswith("values missing")
        assert "10" in violations[0]

    def test_fence_rejected(self):
        violations = check_problem_text("```\ncode\n```\nhas 10 steps", CASE)
        assert any(v.startswith("format") for v in violations)

    def test_list_values_each_required(self):
        case = make_case("xs=[4, 1, 8, 7]")
        assert check_problem_text("cards 4 1 8 7", case) == []
        violations = check_problem_text("cards 4 1 8", case)
        assert violations and "7" in violations[0]


class TestSynthesizeProblem:
    def test_happy_path(self):
        gw = make_gateway(["A tower of 10 floors to climb."])
        rp = synthesize_problem(
            SEED, CASE, "a tower", gw, load_asset("problem_synthesis")
        )
        assert rp.rp_id == make_rp_id("p1", "p1:c0:000")
        assert rp.problem_id == "p1"
        assert rp.case_id == "p1:c0:000"
        assert "10" in rp.text
        assert rp.background_theme == "a tower"
        assert rp.solvable == "unchecked"

    def test_resample_recovers_from_bad_first_draft(self):
        gw = make_gateway(["A tower with no numbers.", "A tower of 10 floors."])
        rp = synthesize_problem(
            SEED, CASE, "a tower", gw, load_asset("problem_synthesis"), format_resamples=1
        )
        assert "10" in rp.text

    def test_exhausted_resamples_rejects_with_last_reason(self):
        gw = make_gateway(["no values here", "still none"])
        with pytest.raises(ItemRejected) as exc:
            synthesize_problem(
                SEED, CASE, "a tower", gw, load_asset("problem_synthesis"),
                format_resamples=1,
            )
        assert exc.value.reason == "values missing"

    def test_fence_reason_surfaces(self):
        gw = make_gateway(["```python\nprint(10)\n```"])
        with pytest.raises(ItemRejected) as exc:
            synthesize_problem(
                SEED, CASE, "a tower", gw, load_asset("problem_synthesis"),
                format_resamples=0,
            )
        assert exc.value.reason == "format"


def test_make_rp_id_stable_and_distinct():
    a = make_rp_id("p1", "c1")
    assert a == make_rp_id("p1", "c1")
    assert a != make_rp_id("p1", "c2")
    assert a.startswith("rp-")
