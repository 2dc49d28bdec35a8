"""Rule-based and mean-variance baselines, as scikit-learn style estimators.

The rule strategies take a 1-D array of closes and emit, for each bar that
has ``lookback + 1`` predecessors, the exposure held from the previous close
into that bar. ``MarkowitzMeanVariance`` is fitted on a matrix of training
log returns and holds fixed weights afterwards.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..errors import ConfigError, DataError
from ..market_data import BarSeries
from ..sizing import Direction
from .metrics import DailyRecord, MetricsReport, build_report

BASELINES = ("momentum", "mean-reversion", "markowitz")


def trailing_log_returns(closes, lookback: int) -> np.ndarray:
    """Trailing ``lookback``-bar log return known before each bar; NaN where undefined."""
    c = np.asarray(closes, dtype=float)
    out = np.full(c.shape, np.nan)
    # bar t sees ln(c[t-1] / c[t-1-k])
    if c.size > lookback + 1:
        out[lookback + 1:] = np.log(c[lookback:-1] / c[:-lookback - 1])
    return out


class MomentumStrategy(BaseEstimator):
    """Fully invested in the direction of the trailing ``lookback``-bar return."""

    sign = 1.0

    def __init__(self, lookback: int = 5):
        self.lookback = lookback

    def fit(self, X=None, y=None):
        if not isinstance(self.lookback, (int, np.integer)) or self.lookback < 1:
            raise ConfigError(f"lookback must be a positive integer, got {self.lookback!r}")
        self.lookback_ = int(self.lookback)
        return self

    def predict(self, closes) -> np.ndarray:
        """Exposure per bar in {-1, 0, +1}; NaN for bars without enough history."""
        check_is_fitted(self)
        c = check_array(np.asarray(closes, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
        if np.any(c <= 0):
            raise DataError("closes must be positive")
        return self.sign * np.sign(trailing_log_returns(c, self.lookback_))


class MeanReversionStrategy(MomentumStrategy):
    """Fully invested against the trailing ``lookback``-bar return."""

    sign = -1.0


class MarkowitzMeanVariance(BaseEstimator):
    """Weights proportional to ``inv(cov) @ mu`` with gross exposure 1."""

    def __init__(self, max_condition: float = 1e12):
        self.max_condition = max_condition

    def fit(self, returns, y=None):
        R = check_array(returns, ensure_min_samples=3, ensure_min_features=2)
        mu = R.mean(axis=0)
        cov = np.cov(R, rowvar=False, ddof=1)
        cond = np.linalg.cond(cov)
        if not np.isfinite(cond) or cond > self.max_condition:
            raise DataError(f"singular covariance matrix (condition number ~ {cond:.3g})")
        raw = np.linalg.solve(cov, mu)
        gross = np.abs(raw).sum()
        if gross == 0:
            raise DataError("mean-variance weights are all zero")
        self.mean_ = mu
        self.cov_ = cov
        self.condition_ = float(cond)
        self.weights_ = raw / gross
        return self

    def predict(self, returns) -> np.ndarray:
        """Portfolio log-return contribution per row."""
        check_is_fitted(self)
        R = check_array(returns, ensure_min_features=len(self.weights_))
        return R @ self.weights_


def _direction(exposure: float) -> Direction | None:
    if exposure > 0:
        return Direction.UP
    if exposure < 0:
        return Direction.DOWN
    return None


def _joined(train: BarSeries | None, test: BarSeries) -> BarSeries:
    if train is None:
        return test
    bars = [b for b in train.bars if b.date < test[0].date] + list(test.bars)
    return BarSeries(test.asset, tuple(bars))


def run_baseline(kind: str, train: Mapping[str, BarSeries], test: Mapping[str, BarSeries],
                 lookback: int = 5, params_echo: dict | None = None,
                 annualization: int = 252, risk_free_annual: float = 0.0) -> tuple[MetricsReport, list[DailyRecord]]:
    """Backtest a baseline over the test series.

    Rule strategies split the unit gross budget equally across assets and may
    look back into the training bars. Markowitz weights come from the
    training log returns on the shared calendar.
    """
    if kind not in BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}; choose from {', '.join(BASELINES)}")
    if not test:
        raise DataError("baseline needs at least one test series")
    records: list[DailyRecord] = []
    assets = sorted(test)
    if kind in ("momentum", "mean-reversion"):
        cls = MomentumStrategy if kind == "momentum" else MeanReversionStrategy
        model = cls(lookback).fit()
        budget = 1.0 / len(assets)
        for asset in assets:
            full = _joined(train.get(asset), test[asset])
            closes = full.closes
            exposures = model.predict(closes)
            start = full.index_of(test[asset][0].date)
            for i in range(max(start, 1), len(full)):
                if np.isnan(exposures[i]):
                    continue
                e = float(exposures[i]) * budget
                records.append(DailyRecord(
                    date=full[i].date, asset=asset, action="long" if e > 0 else "short" if e < 0 else "hold",
                    exposure_after=e, log_return_realized=float(np.log(closes[i] / closes[i - 1])),
                    predicted_direction=_direction(e), window_end=full[i - 1].date,
                ))
    else:
        if len(assets) < 2:
            raise DataError("Markowitz baseline needs at least two assets")
        missing = [a for a in assets if a not in train]
        if missing:
            raise DataError(f"no training series for {', '.join(missing)}")
        train_R = _aligned_log_returns([train[a] for a in assets])[1]
        model = MarkowitzMeanVariance().fit(train_R)
        dates, test_R = _aligned_log_returns([test[a] for a in assets])
        for row, (date, prev) in enumerate(dates):
            for j, asset in enumerate(assets):
                e = float(model.weights_[j])
                records.append(DailyRecord(
                    date=date, asset=asset, action="long" if e > 0 else "short" if e < 0 else "hold",
                    exposure_after=e, log_return_realized=float(test_R[row, j]), window_end=prev,
                ))
        params_echo = {**(params_echo or {}), "markowitz_weights": dict(zip(assets, model.weights_.tolist()))}
    if not records:
        raise DataError("baseline produced no tradable days")
    echo = {**(params_echo or {}), "baseline": kind, "lookback": lookback}
    return build_report(records, echo, annualization, risk_free_annual), records


def _aligned_log_returns(series_set: Sequence[BarSeries]) -> tuple[list[tuple[str, str]], np.ndarray]:
    common = sorted(set.intersection(*(set(s.dates) for s in series_set)))
    if len(common) < 2:
        raise DataError("assets share fewer than two dates")
    closes = np.array([[s[s.index_of(d)].close for s in series_set] for d in common])
    rets = np.log(closes[1:] / closes[:-1])
    return list(zip(common[1:], common[:-1])), rets
