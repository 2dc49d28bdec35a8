import pytest

from conftest import DOWN, PAST, REFINED, RISK_LOW, UP, happy_script
from expertrade.agents import ExperienceLog, PipelineSettings, ScriptedBackend, apply_refinement, run_day
from expertrade.agents.pipeline import NEUTRAL_PAST_SUMMARY, contradicts, run_alignment
from expertrade.errors import BackendError
from expertrade.expertise import Persona
from expertrade.market_data import EventDoc, make_window, synthetic_bars
from expertrade.sizing import Action, Direction, RiskLevel


@pytest.fixture
def window():
    s = synthetic_bars("AAPL", 12, seed=2)
    events = [EventDoc(s[7].date, "Reuters", "Apple beats iPhone estimates", "AAPL")]
    return make_window(s, events, s[9].date, 5)


def stages(backend):
    return [stage for stage, _ in backend.history]


class TestRunDay:
    def test_happy_path(self, window, store, buffett_query):
        backend = ScriptedBackend(happy_script(buffett_query, risk=RISK_LOW))
        day = run_day(window, store, backend)
        assert stages(backend) == ["historical_trend", "current_event", "human_expertise", "risk_analysis", "decision"]
        assert day.past_summary == "steady upward drift on rising volume."
        assert day.current_summary == buffett_query
        assert day.refined_summary == "investors likely extend the rally."
        assert day.risk.level is RiskLevel.LOW
        assert day.prediction.direction is Direction.UP
        assert day.activated and day.retrieval.case.id == "buffett-001"
        assert not day.degraded and day.retries == 0

    def test_outputs_thread_into_later_prompts(self, window, store, buffett_query):
        backend = ScriptedBackend(happy_script(buffett_query))
        run_day(window, store, backend)
        prompts = dict(backend.history)
        assert "steady upward drift on rising volume." in prompts["current_event"]
        assert "Apple beats iPhone estimates" in prompts["current_event"]
        assert buffett_query in prompts["human_expertise"]
        assert store["buffett-001"].knowledge_text in prompts["human_expertise"]
        for layer in ("steady upward drift", buffett_query, "investors likely extend"):
            assert layer in prompts["risk_analysis"]
            assert layer in prompts["decision"]

    def test_window_bars_in_prompt_and_nothing_later(self, window):
        backend = ScriptedBackend(happy_script("x"))
        run_day(window, None, backend)
        prompt = dict(backend.history)["historical_trend"]
        for b in window.bars:
            assert b.date in prompt
        assert window.asof not in prompt

    def test_gate_miss_skips_expertise(self, window, store):
        backend = ScriptedBackend(happy_script("zzz qqq unrelated tokens"))
        day = run_day(window, store, backend)
        assert "human_expertise" not in stages(backend)
        assert not day.activated
        assert day.refined_summary == day.current_summary

    def test_retry_then_valid(self, window, buffett_query, store):
        script = happy_script(buffett_query, risk_analysis=["garbage", "[risk_level: low, risk_evaluation: x]",
                                                            RISK_LOW])
        backend = ScriptedBackend(script)
        day = run_day(window, store, backend, PipelineSettings(retry_limit=2))
        assert day.risk.level is RiskLevel.LOW
        assert day.retries == 2
        assert backend.calls["risk_analysis"] == 3
        assert not day.degraded

    def test_always_malformed_degrades(self, window, buffett_query, store):
        backend = ScriptedBackend(happy_script(buffett_query, decision="I think it goes up"))
        day = run_day(window, store, backend, PipelineSettings(retry_limit=2))
        assert day.degraded
        assert day.risk.level is RiskLevel.HIGH
        assert day.prediction.direction is Direction.UP
        assert backend.calls["decision"] == 3

    def test_exhausted_script_is_backend_error(self, window):
        backend = ScriptedBackend([PAST])
        with pytest.raises(BackendError):
            run_day(window, None, backend)

    def test_no_past_trend_uses_neutral_summary(self, window):
        backend = ScriptedBackend(happy_script("x"))
        day = run_day(window, None, backend, PipelineSettings(use_past_trend=False))
        assert "historical_trend" not in stages(backend)
        assert day.past_summary == NEUTRAL_PAST_SUMMARY

    def test_no_expertise_skips_retrieval(self, window, store, buffett_query):
        backend = ScriptedBackend(happy_script(buffett_query))
        day = run_day(window, store, backend, PipelineSettings(use_expertise=False))
        assert day.retrieval is None and not day.activated
        assert "human_expertise" not in stages(backend)

    def test_experiences_feed_past_exps(self, window):
        log = ExperienceLog()
        log.record(window.bars[1].date, "earlier rebound faded", 0.01)
        backend = ScriptedBackend(happy_script("x"))
        run_day(window, None, backend, experiences=log)
        assert "earlier rebound faded" in dict(backend.history)["historical_trend"]


class TestRefinement:
    @pytest.fixture
    def prev(self, window, store, buffett_query):
        return run_day(window, store, ScriptedBackend(happy_script(buffett_query)))

    def test_agreement_makes_no_call(self, prev):
        backend = ScriptedBackend([])
        assert apply_refinement(prev, 0.01, backend) == prev.past_summary
        assert backend.calls.total() == 0

    def test_zero_return_counts_as_agreement(self, prev):
        backend = ScriptedBackend([])
        assert apply_refinement(prev, 0.0, backend) == prev.past_summary
        assert backend.calls.total() == 0

    def test_contradiction_revises(self, prev):
        backend = ScriptedBackend([f"[{prev.asof}_summary: momentum stalled on supply news]"])
        assert apply_refinement(prev, -0.02, backend) == "momentum stalled on supply news"
        prompt = backend.history[0][1]
        assert prev.asof in prompt and "-0.019801" in prompt

    def test_failure_keeps_summary(self, prev):
        backend = ScriptedBackend(["no tag here"] * 3)
        assert apply_refinement(prev, -0.02, backend) == prev.past_summary

    def test_log_replacement_visible_downstream(self):
        log = ExperienceLog()
        log.record("2023-01-03", "old view", -0.01)
        log.replace_summary("2023-01-03", "new view")
        rendered = log.render(["2023-01-03"])
        assert "new view" in rendered and "old view" not in rendered
        assert "-0.9950%" in rendered

    @pytest.mark.parametrize("direction,r,expected", [
        (Direction.UP, -0.01, True), (Direction.UP, 0.01, False), (Direction.UP, 0.0, False),
        (Direction.DOWN, 0.01, True), (Direction.DOWN, -0.01, False), (Direction.DOWN, 0.0, False),
    ])
    def test_contradicts(self, direction, r, expected):
        assert contradicts(direction, r) is expected


class TestAlignment:
    recs = [(Persona.BUFFETT, "AAPL", Action.LONG), (Persona.LYNCH, "TSLA", Action.SHORT)]

    def test_votes(self):
        backend = ScriptedBackend(["[Buffett:Yes, Soros:Yes, Lynch:No, Graham:Yes]"])
        votes = run_alignment([EventDoc("2023-01-02", "AP", "CPI cools")], self.recs, backend)
        assert votes[Persona.BUFFETT] and not votes[Persona.LYNCH]
        prompt = backend.history[0][1]
        assert "CPI cools" in prompt and "Lynch (TSLA): short" in prompt

    def test_unparseable_means_no_override(self):
        assert run_alignment([], self.recs, ScriptedBackend(["no idea"] * 3)) is None


def test_scripted_sequences_by_stage():
    backend = ScriptedBackend({"decision": [UP, DOWN]})
    assert backend.complete("p", "decision") == UP
    assert backend.complete("p", "decision") == DOWN
    with pytest.raises(BackendError):
        backend.complete("p", "decision")
    with pytest.raises(BackendError):
        backend.complete("p", "risk_analysis")


def test_scripted_from_file(tmp_path):
    import json

    path = tmp_path / "script.json"
    path.write_text(json.dumps({"human_expertise": REFINED}))
    assert ScriptedBackend.from_file(path).complete("p", "human_expertise") == REFINED
