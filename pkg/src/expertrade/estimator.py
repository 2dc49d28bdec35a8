"""scikit-learn style facade over the agent backtester."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .agents.pipeline import PipelineSettings
from .backtest.engine import BacktestResult, EngineConfig, ablate, run_portfolio, run_single_asset
from .expertise import ExpertStore
from .market_data import BarSeries
from .sizing import RiskBetaConfig, SizingParams


class AgentTrader(BaseEstimator):
    """Agent pipeline plus risk-aware sizing with estimator-style parameters.

    ``fit`` takes an optional :class:`ExpertStore` (the bundled sample when
    omitted) and freezes the engine configuration. ``predict`` returns the
    forecast direction (``"up"``/``"down"``) for each tradable day of
    ``[start, end]``; ``backtest`` returns the full result.
    """

    def __init__(self, backend=None, window=5, eps_alpha=0.1, eps_gamma=0.01, delta_low=0.2,
                 delta_high=0.85, temperature=1.0, tau_sim=0.35, retry_limit=2, seed=0,
                 ablation=None, use_alignment=True):
        self.backend = backend
        self.window = window
        self.eps_alpha = eps_alpha
        self.eps_gamma = eps_gamma
        self.delta_low = delta_low
        self.delta_high = delta_high
        self.temperature = temperature
        self.tau_sim = tau_sim
        self.retry_limit = retry_limit
        self.seed = seed
        self.ablation = ablation
        self.use_alignment = use_alignment

    def fit(self, X: ExpertStore | None = None, y=None):
        cfg = EngineConfig(
            window=self.window,
            sizing=SizingParams(self.eps_alpha, self.eps_gamma, self.delta_low, self.delta_high,
                                self.temperature, self.seed),
            betas=RiskBetaConfig(),
            pipeline=PipelineSettings(tau_sim=self.tau_sim, retry_limit=self.retry_limit),
            use_alignment=self.use_alignment,
        )
        self.config_ = ablate(cfg, self.ablation) if self.ablation else cfg
        self.store_ = X if X is not None else ExpertStore.sample()
        return self

    def backtest(self, X, start: str, end: str, events=()) -> BacktestResult:
        check_is_fitted(self)
        if isinstance(X, BarSeries):
            return run_single_asset(X, list(events), self.store_, self.backend, self.config_, start, end)
        return run_portfolio(list(X), list(events), self.store_, self.backend, self.config_, start, end)

    def predict(self, X: BarSeries, start: str, end: str, events=()) -> np.ndarray:
        result = self.backtest(X, start, end, events)
        return np.array([r.predicted_direction.value for r in result.records])
