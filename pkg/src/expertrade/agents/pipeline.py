"""Per-day agent pipeline: historical -> current -> expertise -> risk -> decision.

Each stage's parsed output is threaded into the next stage's prompt. A stage
whose output cannot be parsed is re-requested up to ``retry_limit`` times;
if it still fails the day degrades to high risk / up so that sizing keeps
exposure minimal. A stage whose backend fails on every attempt raises
:class:`BackendError`.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, TypeVar

from ..errors import BackendError, ParseError
from ..expertise import ExpertStore, Persona, RetrievalResult, activation_gate
from ..market_data import DataWindow, EventDoc
from ..sizing import Action, Direction, RiskLevel
from .parsing import (
    AlignmentVotes,
    DirectionPrediction,
    RiskAssessment,
    parse_alignment,
    parse_bracket_summary,
    parse_direction,
    parse_risk,
)
from .prompts import AgentRole, render_prompt

log = logging.getLogger(__name__)

T = TypeVar("T")

NEUTRAL_PAST_SUMMARY = (
    "No historical pattern analysis is available; treat recent price action as neutral."
)
PENDING_DECISION = "Not yet issued; the direction is decided after this risk assessment."
NO_EVENTS = "No events reported in the look-back window."
NO_EXPERIENCES = "No prior analyses recorded."

DEFAULT_PERSONA_ASSETS = {
    Persona.BUFFETT: "AAPL",
    Persona.SOROS: "XAUUSD",
    Persona.LYNCH: "TSLA",
    Persona.GRAHAM: "XOM",
}


@dataclass(frozen=True)
class PipelineSettings:
    tau_sim: float = 0.35
    retry_limit: int = 2
    use_past_trend: bool = True
    use_expertise: bool = True


@dataclass(frozen=True)
class DayAnalysis:
    asof: str
    asset: str
    past_summary: str
    current_summary: str
    refined_summary: str
    risk: RiskAssessment
    prediction: DirectionPrediction
    retrieval: RetrievalResult | None = None
    activated: bool = False
    alignment: AlignmentVotes | None = None
    degraded: bool = False
    retries: int = 0


class _Degraded(Exception):
    def __init__(self, role: AgentRole, retries: int):
        super().__init__(role.value)
        self.role = role
        self.retries = retries


class ExperienceLog:
    """Historical summaries per date with their realized returns.

    Entries are read when building the ``{past_exps}`` binding of later
    windows; temporal refinement rewrites them in place.
    """

    def __init__(self):
        self._entries: dict[str, tuple[str, float]] = {}
        self._lock = threading.Lock()

    def record(self, date: str, summary: str, realized_log_return: float) -> None:
        with self._lock:
            self._entries[date] = (summary, realized_log_return)

    def replace_summary(self, date: str, summary: str) -> None:
        with self._lock:
            _, r = self._entries[date]
            self._entries[date] = (summary, r)

    def summary(self, date: str) -> str | None:
        entry = self._entries.get(date)
        return entry[0] if entry else None

    def __contains__(self, date: str) -> bool:
        return date in self._entries

    def __len__(self):
        return len(self._entries)

    def render(self, dates: Sequence[str]) -> str:
        lines = []
        for d in dates:
            if d in self._entries:
                summary, r = self._entries[d]
                lines.append(f"{d}: {summary} (realized return: {math.expm1(r):+.4%})")
        return "\n".join(lines) if lines else NO_EXPERIENCES


def format_bars(window: DataWindow) -> str:
    rows = ["Date,Open,High,Low,Close,Volume"]
    rows += [f"{b.date},{b.open:.4f},{b.high:.4f},{b.low:.4f},{b.close:.4f},{b.volume:.0f}" for b in window.bars]
    return "\n".join(rows)


def format_events(events: Sequence[EventDoc]) -> str:
    if not events:
        return NO_EVENTS
    return "\n".join(f"{e.date} [{e.source}] {e.text}" for e in events)


def ask(backend, role: AgentRole, stage: str, prompt: str, parser: Callable[[str], T],
        retry_limit: int) -> tuple[T, int]:
    """Call the backend and parse, retrying up to ``retry_limit`` times.

    Returns ``(value, retries_used)``. Raises :class:`BackendError` when
    every attempt failed in the backend and ``_Degraded`` when at least one
    attempt produced unparseable text.
    """
    parse_failed = False
    last_exc: Exception | None = None
    for attempt in range(retry_limit + 1):
        try:
            text = backend.complete(prompt, stage=stage)
        except BackendError as exc:
            last_exc = exc
            log.warning("%s: backend error on attempt %d: %s", stage, attempt + 1, exc)
            continue
        try:
            return parser(text), attempt
        except ParseError as exc:
            parse_failed = True
            last_exc = exc
            log.info("%s: unparseable output on attempt %d: %s", stage, attempt + 1, exc)
    if parse_failed:
        raise _Degraded(role, retry_limit)
    raise BackendError(f"{stage} failed after {retry_limit + 1} attempts: {last_exc}") from last_exc


def _summary_parser(tag: str) -> Callable[[str], str]:
    return lambda text: parse_bracket_summary(tag, text)


def run_day(window: DataWindow, store: ExpertStore | None, backend,
            settings: PipelineSettings = PipelineSettings(),
            experiences: ExperienceLog | None = None) -> DayAnalysis:
    """Run the five analysis stages for one asset-day."""
    experiences = experiences if experiences is not None else ExperienceLog()
    retries = 0
    past = current = refined = ""
    retrieval = None
    activated = False
    limit = settings.retry_limit
    try:
        if settings.use_past_trend:
            prompt = render_prompt(AgentRole.HISTORICAL_TREND, {
                "past_exps": experiences.render([b.date for b in window.bars]),
                "data": format_bars(window),
            })
            past, n = ask(backend, AgentRole.HISTORICAL_TREND, AgentRole.HISTORICAL_TREND.value,
                          prompt, _summary_parser("Past_summary"), limit)
            retries += n
        else:
            past = NEUTRAL_PAST_SUMMARY

        prompt = render_prompt(AgentRole.CURRENT_EVENT, {
            "current": format_events(window.events), "past_info": past,
        })
        current, n = ask(backend, AgentRole.CURRENT_EVENT, AgentRole.CURRENT_EVENT.value,
                         prompt, _summary_parser("Current_summary"), limit)
        retries += n

        refined = current
        if settings.use_expertise and store is not None and len(store):
            retrieval = store.retrieve(current)
            activated = activation_gate(retrieval, settings.tau_sim)
            if activated:
                case = retrieval.case
                prompt = render_prompt(AgentRole.HUMAN_EXPERTISE, {
                    "persona": f"{case.persona.value}: {case.knowledge_text}",
                    "current_info": current,
                })
                refined, n = ask(backend, AgentRole.HUMAN_EXPERTISE, AgentRole.HUMAN_EXPERTISE.value,
                                 prompt, _summary_parser("refined_summary"), limit)
                retries += n

        layers = {"past_info": past, "current_info": current, "refined_info": refined}
        prompt = render_prompt(AgentRole.RISK_ANALYSIS, {**layers, "decison": PENDING_DECISION})
        risk, n = ask(backend, AgentRole.RISK_ANALYSIS, AgentRole.RISK_ANALYSIS.value,
                      prompt, parse_risk, limit)
        retries += n

        prompt = render_prompt(AgentRole.DECISION, layers)
        prediction, n = ask(backend, AgentRole.DECISION, AgentRole.DECISION.value,
                            prompt, parse_direction, limit)
        retries += n
    except _Degraded as exc:
        log.warning("%s %s: degraded after %s stage kept failing to parse",
                    window.asset, window.asof, exc.role.value)
        return DayAnalysis(
            asof=window.asof, asset=window.asset,
            past_summary=past, current_summary=current, refined_summary=refined,
            risk=RiskAssessment(RiskLevel.HIGH, f"degraded: {exc.role.value} output unparseable"),
            prediction=DirectionPrediction(Direction.UP, "degraded default"),
            retrieval=retrieval, activated=activated, degraded=True,
            retries=retries + exc.retries,
        )
    return DayAnalysis(
        asof=window.asof, asset=window.asset,
        past_summary=past, current_summary=current, refined_summary=refined,
        risk=risk, prediction=prediction, retrieval=retrieval, activated=activated,
        retries=retries,
    )


def contradicts(direction: Direction, realized_log_return: float) -> bool:
    """True when the realized sign disagrees with the forecast; zero never disagrees."""
    if direction is Direction.UP:
        return realized_log_return < 0
    return realized_log_return > 0


def apply_refinement(prev: DayAnalysis, realized_log_return: float, backend,
                     retry_limit: int = 2) -> str:
    """Return the (possibly revised) historical summary for ``prev.asof``.

    The backend is only consulted when the realized return contradicts the
    forecast. Any failure keeps the previous summary.
    """
    if not math.isfinite(realized_log_return):
        raise ValueError(f"realized return must be finite, got {realized_log_return}")
    if not contradicts(prev.prediction.direction, realized_log_return):
        return prev.past_summary
    prompt = render_prompt(AgentRole.TEMPORAL_REFINEMENT, {
        "date": prev.asof,
        "today_exp": (f"\nAnalysis: {prev.past_summary or prev.current_summary}"
                      f"\nForecast: {prev.prediction.direction.value} ({prev.prediction.rationale})"),
        "temp": f"\nRealized return: R = {math.expm1(realized_log_return):+.6f}",
    })
    try:
        revised, _ = ask(backend, AgentRole.TEMPORAL_REFINEMENT, AgentRole.TEMPORAL_REFINEMENT.value,
                         prompt, _summary_parser(f"{prev.asof}_summary"), retry_limit)
    except (BackendError, _Degraded) as exc:
        log.warning("refinement for %s %s failed (%s); keeping previous summary",
                    prev.asset, prev.asof, exc)
        return prev.past_summary
    return revised


def run_alignment(macro_events: Sequence[EventDoc],
                  recommendations: Sequence[tuple[Persona, str, Action]],
                  backend, retry_limit: int = 2) -> AlignmentVotes | None:
    """Ask the alignment controller to endorse or reject each persona's call.

    Returns ``None`` when the controller's output cannot be parsed, in which
    case no recommendation is overridden.
    """
    lines = [f"{p.value} ({asset}): {action.value}" for p, asset, action in recommendations]
    prompt = render_prompt(AgentRole.EXPERT_ALIGNMENT, {
        "macro_events": format_events(macro_events),
        "decisions": "\n".join(lines) if lines else "No recommendations.",
    })
    try:
        votes, _ = ask(backend, AgentRole.EXPERT_ALIGNMENT, AgentRole.EXPERT_ALIGNMENT.value,
                       prompt, parse_alignment, retry_limit)
    except _Degraded:
        log.warning("alignment output unparseable; no overrides applied")
        return None
    return votes


def persona_for_asset(asset: str, persona_assets: Mapping[Persona, str]) -> Persona | None:
    for persona, mapped in persona_assets.items():
        if mapped == asset:
            return Persona(persona)
    return None
