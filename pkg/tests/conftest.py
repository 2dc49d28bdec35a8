import pytest

from expertrade.agents import ScriptedBackend
from expertrade.expertise import ExpertStore
from expertrade.market_data import bars_from_closes, business_days, synthetic_bars

PAST = "[Past_summary: steady upward drift on rising volume.]"
REFINED = "[refined_summary: investors likely extend the rally.]"
RISK_LOW = "[risk_level: Low, risk_evaluation: all layers agree.]"
RISK_MEDIUM = "[risk_level: Medium, risk_evaluation: mostly consistent.]"
UP = "[direction: up, rationale: momentum.]"
DOWN = "[direction: down, rationale: weakness.]"
ALL_YES = "[Buffett:Yes, Soros:Yes, Lynch:Yes, Graham:Yes]"


def happy_script(current_text: str, risk: str = RISK_MEDIUM, direction: str = UP, **extra) -> dict:
    script = {
        "historical_trend": PAST,
        "current_event": f"[Current_summary: {current_text}]",
        "human_expertise": REFINED,
        "risk_analysis": risk,
        "decision": direction,
        "expert_alignment": ALL_YES,
        "temporal_refinement": "[REFINED_DATE_summary: revised.]",
    }
    script.update(extra)
    return script


def refining_backend(script: dict) -> ScriptedBackend:
    """Scripted backend whose refinement answer carries the date tag from the prompt."""
    import re

    def respond(prompt, stage):
        if stage == "temporal_refinement":
            date = re.search(r"analysis written for (\d{4}-\d{2}-\d{2})", prompt).group(1)
            return f"[{date}_summary: revised view after the miss.]"
        if stage == "expert_refinement":
            return "REVISED: knowledge updated after a failed call."
        return script[stage]

    return ScriptedBackend(respond)


@pytest.fixture
def store():
    return ExpertStore.sample()


@pytest.fixture
def buffett_query(store):
    return store["buffett-001"].query_text


@pytest.fixture
def rising_series():
    return synthetic_bars("AAPL", 60, vol=0.0, drift=0.002)


@pytest.fixture
def zigzag_series():
    closes = [100.0]
    for i in range(1, 80):
        closes.append(closes[-1] * (1.01 if i % 3 else 0.985))
    return bars_from_closes("AAPL", business_days("2023-01-02", len(closes)), closes)
