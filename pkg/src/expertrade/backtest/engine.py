"""Day-by-day simulation of the agent pipeline on one asset or a portfolio.

For every trading day ``t`` in the test span the engine builds the window of
bars strictly before ``t``, runs the agents, sizes and selects an action,
holds the resulting exposure from the previous close to the close of ``t``,
then feeds the realized return back into temporal refinement and the expert
case tallies.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from ..agents.pipeline import (
    DEFAULT_PERSONA_ASSETS,
    DayAnalysis,
    ExperienceLog,
    PipelineSettings,
    apply_refinement,
    contradicts,
    persona_for_asset,
    run_alignment,
    run_day,
)
from ..errors import BackendError, ConfigError, DataError
from ..expertise import ExpertStore, Persona, reliability, similarity_to_gamma
from ..market_data import BarSeries, EventDoc, log_return, make_window
from ..sizing import (
    Action,
    Decision,
    Direction,
    RiskBetaConfig,
    SizingParams,
    position_score,
    portfolio_decisions,
    sample_rho,
    select_action,
    stream_rngs,
)
from .metrics import DailyRecord, MetricsReport, build_report

log = logging.getLogger(__name__)

ABLATIONS = ("no-refinement", "no-past-trend", "no-expertise", "no-risk")
NEUTRAL_ALPHA = 0.5


@dataclass(frozen=True)
class EngineConfig:
    window: int = 5
    sizing: SizingParams = field(default_factory=SizingParams)
    betas: RiskBetaConfig = field(default_factory=RiskBetaConfig)
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)
    use_refinement: bool = True
    refine_experts: bool = True
    fixed_full_position: bool = False
    use_alignment: bool = True
    persona_assets: Mapping[Persona, str] = field(default_factory=lambda: dict(DEFAULT_PERSONA_ASSETS))
    annualization: int = 252
    risk_free_annual: float = 0.0

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError(f"window must be positive, got {self.window}")
        if self.annualization < 1:
            raise ConfigError("annualization must be positive")

    @property
    def seed(self) -> int:
        return self.sizing.seed

    def echo(self) -> dict:
        return {
            "window": self.window,
            "sizing": self.sizing.to_dict(),
            "risk_beta": self.betas.to_dict(),
            "tau_sim": self.pipeline.tau_sim,
            "retry_limit": self.pipeline.retry_limit,
            "use_past_trend": self.pipeline.use_past_trend,
            "use_expertise": self.pipeline.use_expertise,
            "use_refinement": self.use_refinement,
            "refine_experts": self.refine_experts,
            "fixed_full_position": self.fixed_full_position,
            "use_alignment": self.use_alignment,
            "persona_assets": {Persona(p).value: a for p, a in sorted(self.persona_assets.items())},
            "annualization": self.annualization,
            "risk_free_annual": self.risk_free_annual,
        }


def ablate(cfg: EngineConfig, variant: str) -> EngineConfig:
    """Switch off one component, named as in ``ABLATIONS``."""
    if variant == "no-refinement":
        return replace(cfg, use_refinement=False)
    if variant == "no-past-trend":
        return replace(cfg, pipeline=replace(cfg.pipeline, use_past_trend=False))
    if variant == "no-expertise":
        return replace(cfg, pipeline=replace(cfg.pipeline, use_expertise=False))
    if variant == "no-risk":
        return replace(cfg, fixed_full_position=True)
    raise ConfigError(f"unknown ablation {variant!r}; choose from {', '.join(ABLATIONS)}")


@dataclass
class BacktestResult:
    report: MetricsReport
    records: list[DailyRecord]
    analyses: list[DayAnalysis]
    store: ExpertStore | None = None


class BacktestFailure(BackendError):
    """Raised when the backend fails mid-run; carries the partial result."""

    def __init__(self, message: str, partial: BacktestResult | None):
        super().__init__(message)
        self.partial = partial


def apply_decision(state: Mapping[str, float], asset: str, decision: Decision) -> dict[str, float]:
    new = dict(state)
    action = Action(decision.action)
    if action is Action.LONG:
        new[asset] = decision.size
    elif action is Action.SHORT:
        new[asset] = -decision.size
    elif action is Action.CLOSE:
        new[asset] = 0.0
    else:
        new.setdefault(asset, 0.0)
    return new


def tradable_indices(series: BarSeries, start: str, end: str, window: int) -> list[int]:
    """Bar indices of tradable test days: inside ``[start, end]`` with a full window before."""
    return [i for i, b in enumerate(series.bars) if start <= b.date <= end and i >= window]


class _AssetRun:
    """Mutable per-asset state: the experience log and the RNG stream."""

    def __init__(self, series, events, rng, cfg: EngineConfig):
        self.series = series
        self.events = events
        self.rng = rng
        self.cfg = cfg
        self.experiences = ExperienceLog()

    def analyse(self, i: int, store, backend):
        cfg = self.cfg
        window = make_window(self.series, self.events, self.series[i].date, cfg.window)
        analysis = run_day(window, store, backend, cfg.pipeline, self.experiences)
        rho = sample_rho(analysis.risk.level, cfg.betas, self.rng)
        if analysis.activated and analysis.retrieval is not None:
            alpha = reliability(analysis.retrieval.case)
            gamma = similarity_to_gamma(analysis.retrieval.similarity)
        else:
            alpha, gamma = NEUTRAL_ALPHA, cfg.sizing.eps_gamma
        return window, analysis, rho, alpha, gamma

    def decide(self, direction: Direction, rho: float, alpha: float, gamma: float) -> Decision:
        cfg = self.cfg
        if cfg.fixed_full_position:
            action = Action.LONG if direction is Direction.UP else Action.SHORT
            return Decision(action, 1.0, rho, alpha, gamma)
        w = position_score(rho, alpha, gamma, cfg.sizing)
        d = select_action(direction, w, cfg.sizing)
        return Decision(d.action, d.size, rho, alpha, gamma)

    def settle(self, i: int, window, analysis: DayAnalysis, store, backend) -> float:
        """Realize day ``i``'s return and run the feedback loops."""
        cfg = self.cfg
        r = log_return(self.series[i - 1].close, self.series[i].close)
        if analysis.past_summary:
            self.experiences.record(analysis.asof, analysis.past_summary, r)
        revised = None
        wrong = contradicts(analysis.prediction.direction, r)
        refinable = cfg.use_refinement and cfg.pipeline.use_past_trend and not analysis.degraded
        if refinable and wrong and analysis.past_summary:
            revised = apply_refinement(analysis, r, backend, cfg.pipeline.retry_limit)
            if revised == analysis.past_summary:
                revised = None
            else:
                self.experiences.replace_summary(analysis.asof, revised)
        if analysis.activated and analysis.retrieval is not None and store is not None and r != 0:
            case_id = analysis.retrieval.case.id
            store.record_outcome(case_id, hit=not wrong)
            if wrong and revised and cfg.refine_experts:
                store.refine(case_id, revised, backend)
        return r


def _record(i, series, window, analysis, decision, exposure, r) -> DailyRecord:
    return DailyRecord(
        date=series[i].date,
        asset=series.asset,
        action=Action(decision.action).value,
        exposure_after=exposure,
        log_return_realized=r,
        predicted_direction=analysis.prediction.direction,
        window_end=window.end,
        w=decision.size,
        rho=decision.rho,
        alpha=decision.alpha,
        gamma=decision.gamma,
        risk_level=analysis.risk.level.value,
        case_id=analysis.retrieval.case.id if analysis.activated and analysis.retrieval else None,
        degraded=analysis.degraded,
    )


def _finish(records, analyses, store, cfg, status="ok", extra_echo=None) -> BacktestResult:
    echo = cfg.echo()
    echo.update(extra_echo or {})
    report = build_report(records, echo, cfg.annualization, cfg.risk_free_annual, status)
    return BacktestResult(report, records, analyses, store)


def run_single_asset(series: BarSeries, events: Sequence[EventDoc], store: ExpertStore | None,
                     backend, cfg: EngineConfig, test_start: str, test_end: str) -> BacktestResult:
    """Backtest one asset over ``[test_start, test_end]``.

    ``store`` is copied, so the caller's case tallies are left untouched;
    the updated copy is returned on the result.
    """
    idx = tradable_indices(series, test_start, test_end, cfg.window)
    if not idx:
        raise DataError(f"{series.asset}: no tradable days in {test_start}..{test_end}")
    store = store.copy() if store is not None else None
    run = _AssetRun(series, events, stream_rngs(cfg.seed, 1)[0], cfg)
    records: list[DailyRecord] = []
    analyses: list[DayAnalysis] = []
    state = {series.asset: 0.0}
    for i in idx:
        try:
            window, analysis, rho, alpha, gamma = run.analyse(i, store, backend)
            decision = run.decide(analysis.prediction.direction, rho, alpha, gamma)
            state = apply_decision(state, series.asset, decision)
            r = run.settle(i, window, analysis, store, backend)
        except BackendError as exc:
            partial = _finish(records, analyses, store, cfg, "failed") if records else None
            raise BacktestFailure(f"{series.asset} {series[i].date}: {exc}", partial) from exc
        analyses.append(analysis)
        records.append(_record(i, series, window, analysis, decision, state[series.asset], r))
    return _finish(records, analyses, store, cfg, extra_echo={"mode": "single", "asset": series.asset,
                                                              "test_start": test_start, "test_end": test_end})


def align_calendars(series_set: Sequence[BarSeries]) -> list[BarSeries]:
    common = set(series_set[0].dates)
    for s in series_set[1:]:
        common &= set(s.dates)
    if not common:
        raise DataError("asset calendars share no dates")
    return [BarSeries(s.asset, tuple(b for b in s.bars if b.date in common)) for s in series_set]


def run_portfolio(series_set: Sequence[BarSeries], events: Sequence[EventDoc], store: ExpertStore | None,
                  backend, cfg: EngineConfig, test_start: str, test_end: str) -> BacktestResult:
    """Long-short portfolio over the intersection of the assets' calendars."""
    if not series_set:
        raise DataError("portfolio needs at least one asset")
    assets = [s.asset for s in series_set]
    if len(set(assets)) != len(assets):
        raise DataError("duplicate asset in portfolio")
    aligned = align_calendars(series_set)
    base = aligned[0]
    idx = tradable_indices(base, test_start, test_end, cfg.window)
    if not idx:
        raise DataError(f"portfolio: no tradable days in {test_start}..{test_end}")
    store = store.copy() if store is not None else None
    runs = [_AssetRun(s, events, rng, cfg) for s, rng in zip(aligned, stream_rngs(cfg.seed, len(aligned)))]
    records: list[DailyRecord] = []
    analyses: list[DayAnalysis] = []
    for i in idx:
        date = base[i].date
        try:
            day = [run.analyse(i, store, backend) for run in runs]
            decisions = {
                run.series.asset: run.decide(a.prediction.direction, rho, alpha, gamma)
                for run, (_, a, rho, alpha, gamma) in zip(runs, day)
            }
            if cfg.use_alignment:
                decisions, votes = _align(date, runs, day, decisions, events, backend, cfg)
                day = [(w, replace(a, alignment=votes), *rest) for (w, a, *rest) in day]
            exposures = portfolio_decisions(
                [(asset, d.action, d.size) for asset, d in decisions.items()], cfg.sizing.temperature
            )
            settled = [run.settle(i, w, a, store, backend) for run, (w, a, *_) in zip(runs, day)]
        except BackendError as exc:
            partial = _finish(records, analyses, store, cfg, "failed") if records else None
            raise BacktestFailure(f"portfolio {date}: {exc}", partial) from exc
        for run, (window, analysis, *_), r in zip(runs, day, settled):
            asset = run.series.asset
            analyses.append(analysis)
            records.append(_record(i, run.series, window, analysis, decisions[asset], exposures[asset], r))
    return _finish(records, analyses, store, cfg, extra_echo={
        "mode": "portfolio", "assets": assets, "test_start": test_start, "test_end": test_end,
    })


def _align(date, runs, day, decisions, events, backend, cfg: EngineConfig):
    """Run the alignment gate; a rejected persona's asset has its reliability floored."""
    recs = []
    for run in runs:
        persona = persona_for_asset(run.series.asset, cfg.persona_assets)
        if persona is not None:
            recs.append((persona, run.series.asset, Action(decisions[run.series.asset].action)))
    if not recs:
        return decisions, None
    window_start = day[0][0].start
    macro = [e for e in events if e.is_macro and window_start <= e.date < date]
    votes = run_alignment(macro, recs, backend, cfg.pipeline.retry_limit)
    if votes is None:
        return decisions, None
    out = dict(decisions)
    by_asset = {run.series.asset: (run, d) for run, d in zip(runs, day)}
    for persona, asset, _ in recs:
        if not votes[persona]:
            run, (_, analysis, rho, _, gamma) = by_asset[asset]
            out[asset] = run.decide(analysis.prediction.direction, rho, cfg.sizing.eps_alpha, gamma)
    return out, votes
