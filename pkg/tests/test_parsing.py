import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpora import fuzz_text, payload, votes, wrap
from expertrade.agents import (
    AgentRole,
    TEMPLATES,
    format_alignment,
    format_direction,
    format_risk,
    format_summary,
    parse_alignment,
    parse_bracket_summary,
    parse_direction,
    parse_risk,
    render_prompt,
)
from expertrade.agents.parsing import DirectionPrediction, RiskAssessment
from expertrade.agents.prompts import placeholders
from expertrade.errors import ConfigError, ParseError
from expertrade.expertise import Persona
from expertrade.sizing import Direction, RiskLevel

PARSERS = [
    lambda t: parse_bracket_summary("Past_summary", t),
    lambda t: parse_bracket_summary("Current_summary", t),
    lambda t: parse_bracket_summary("refined_summary", t),
    lambda t: parse_bracket_summary("2023-01-03_summary", t),
    parse_risk,
    parse_direction,
    parse_alignment,
]


class TestSummaries:
    def test_past_summary(self):
        assert parse_bracket_summary("Past_summary", "[Past_summary: Uptrend.]") == "Uptrend."

    def test_surrounding_prose_ignored(self):
        text = "Sure, here it is:\n[Current_summary: Fed holds rates.]\nHope that helps."
        assert parse_bracket_summary("Current_summary", text) == "Fed holds rates."

    def test_nested_brackets_survive(self):
        text = "[refined_summary: guidance [raised] beats [consensus [FY24]]]"
        assert parse_bracket_summary("refined_summary", text) == "guidance [raised] beats [consensus [FY24]]"

    def test_date_tag(self):
        assert parse_bracket_summary("2023-01-03_summary", "[2023-01-03_summary: revised]") == "revised"
        with pytest.raises(ParseError):
            parse_bracket_summary("2023-01-03_summary", "[2023-01-04_summary: revised]")

    @pytest.mark.parametrize("text", ["", "Past_summary: x", "[Past_summary: ]", "[Past_summary: x",
                                      "[past_summary: x]", "[Current_summary: x]"])
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse_bracket_summary("Past_summary", text)

    def test_bytes_input(self):
        assert parse_bracket_summary("Past_summary", "[Past_summary: café]".encode()) == "café"


class TestRisk:
    @pytest.mark.parametrize("level", list(RiskLevel))
    def test_levels(self, level):
        got = parse_risk(f"[risk_level: {level.value}, risk_evaluation: layers agree]")
        assert got == RiskAssessment(level, "layers agree")

    @pytest.mark.parametrize("text", [
        "[risk_level: low, risk_evaluation: x]",
        "[risk_level: HIGH, risk_evaluation: x]",
        "[risk_level: Severe, risk_evaluation: x]",
        "[risk_level: Low risk_evaluation: x]",
        "[risk_level: Low, risk_evaluation: ]",
        "[risk_level: Low]",
    ])
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse_risk(text)

    def test_rationale_with_commas_and_brackets(self):
        got = parse_risk("[risk_level: Medium, risk_evaluation: mixed, see [note], Fed, oil]")
        assert got.rationale == "mixed, see [note], Fed, oil"


class TestDirection:
    def test_up_down(self):
        assert parse_direction("[direction: up, rationale: r]").direction is Direction.UP
        assert parse_direction("[direction: down, rationale: r]").direction is Direction.DOWN

    @pytest.mark.parametrize("token", ["Up", "DOWN", "flat", "long"])
    def test_rejects(self, token):
        with pytest.raises(ParseError):
            parse_direction(f"[direction: {token}, rationale: r]")


class TestAlignment:
    def test_example(self):
        v = parse_alignment("[Buffett:Yes, Soros:No, Lynch:Yes, Graham:No]")
        assert [v[p] for p in Persona] == [True, False, True, False]

    def test_every_permutation(self):
        for order in itertools.permutations(Persona):
            text = "[" + ", ".join(f"{p.value}:{'Yes' if i % 2 else 'No'}" for i, p in enumerate(order)) + "]"
            v = parse_alignment(text)
            assert all(v[p] == (order.index(p) % 2 == 1) for p in Persona)

    @pytest.mark.parametrize("text", [
        "[Buffett:Yes, Soros:No, Lynch:Yes]",
        "[Buffett:Yes, Soros:No, Lynch:Yes, Graham:No, Munger:Yes]",
        "[Buffett:Yes, Buffett:No, Soros:No, Lynch:Yes, Graham:No]",
        "[Buffett:yes, Soros:No, Lynch:Yes, Graham:No]",
        "[Buffett:Maybe, Soros:No, Lynch:Yes, Graham:No]",
        "Buffett:Yes, Soros:No, Lynch:Yes, Graham:No",
    ])
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse_alignment(text)


class TestRoundTrip:
    def test_generated_corpus(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            p = payload(rng).strip()
            for tag in ("Past_summary", "Current_summary", "refined_summary", "2021-07-09_summary"):
                assert parse_bracket_summary(tag, wrap(rng, format_summary(tag, p))) == p
            risk = RiskAssessment(RiskLevel(rng.choice([l.value for l in RiskLevel])), p)
            assert parse_risk(wrap(rng, format_risk(risk))) == risk
            pred = DirectionPrediction(Direction(rng.choice(["up", "down"])), p)
            assert parse_direction(wrap(rng, format_direction(pred))) == pred
            v = votes(rng)
            assert parse_alignment(wrap(rng, format_alignment(v))) == v

    @settings(max_examples=200, deadline=None)
    @given(st.text(min_size=1).filter(lambda s: s.strip() and "[" not in s and "]" not in s))
    def test_arbitrary_text_payload(self, text):
        assert parse_bracket_summary("Past_summary", format_summary("Past_summary", text)) == text.strip()


class TestFuzz:
    def test_only_parse_errors(self):
        rng = np.random.default_rng(5)
        for _ in range(5000):
            text = fuzz_text(rng)
            for parser in PARSERS:
                try:
                    parser(text)
                except ParseError:
                    pass

    @pytest.mark.parametrize("bad", [None, 12, 3.5, ["[Past_summary: x]"]])
    def test_non_text(self, bad):
        for parser in PARSERS:
            with pytest.raises(ParseError):
                parser(bad)


class TestPrompts:
    def test_every_role_has_a_template(self):
        assert set(TEMPLATES) == set(AgentRole)

    @pytest.mark.parametrize("role", list(AgentRole))
    def test_render_fills_every_placeholder(self, role):
        bindings = {name: f"<{name}>" for name in placeholders(TEMPLATES[role])}
        text = render_prompt(role, bindings)
        for name in bindings:
            assert f"<{name}>" in text
            assert "{" + name + "}" not in text

    def test_missing_binding_named(self):
        with pytest.raises(ConfigError, match="past_exps"):
            render_prompt(AgentRole.HISTORICAL_TREND, {"data": "x"})

    def test_values_are_not_re_expanded(self):
        text = render_prompt(AgentRole.CURRENT_EVENT, {"current": "{past_info}", "past_info": "P"})
        assert "{past_info}" in text

    def test_output_formats_present(self):
        assert "[Past_summary:" in TEMPLATES[AgentRole.HISTORICAL_TREND]
        assert "risk_evaluation" in TEMPLATES[AgentRole.RISK_ANALYSIS]
        assert "Buffett:" in TEMPLATES[AgentRole.EXPERT_ALIGNMENT]
