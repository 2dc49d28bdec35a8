"""Performance and classification metrics over daily records.

Strategy returns are exposure-weighted log returns, so cumulative return is
a plain sum and the equity curve is ``exp`` of its running total.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from ..errors import DataError, UndefinedMetricError
from ..sizing import Direction

FLAT = "flat"


@dataclass(frozen=True)
class DailyRecord:
    date: str
    asset: str
    action: str
    exposure_after: float
    log_return_realized: float
    predicted_direction: Direction | None = None
    window_end: str | None = None
    w: float | None = None
    rho: float | None = None
    alpha: float | None = None
    gamma: float | None = None
    risk_level: str | None = None
    case_id: str | None = None
    degraded: bool = False

    def __post_init__(self):
        if not math.isfinite(self.log_return_realized):
            raise DataError(f"{self.asset} {self.date}: non-finite log return")
        # lookahead audit: the decision window must end before the traded day
        if self.window_end is not None and not self.window_end < self.date:
            raise AssertionError(
                f"{self.asset} {self.date}: decision window ends {self.window_end}, not before trade date"
            )

    @property
    def actual_direction(self) -> str:
        r = self.log_return_realized
        if r > 0:
            return Direction.UP.value
        if r < 0:
            return Direction.DOWN.value
        return FLAT

    @property
    def strategy_return(self) -> float:
        return self.exposure_after * self.log_return_realized


def daily_returns(records: Iterable[DailyRecord]) -> "OrderedDict[str, float]":
    """Strategy return per date, summed across assets, in date order."""
    out: dict[str, float] = {}
    for r in records:
        out[r.date] = out.get(r.date, 0.0) + r.strategy_return
    return OrderedDict(sorted(out.items()))


def cumulative_return(records: Iterable[DailyRecord]) -> float:
    return math.fsum(r.strategy_return for r in records)


def equity_curve(returns: Sequence[float], initial: float = 1.0) -> np.ndarray:
    """Equity including the starting point: ``initial * exp(cumsum(returns))``."""
    return initial * np.exp(np.concatenate([[0.0], np.cumsum(np.asarray(returns, dtype=float))]))


def sharpe(daily: Sequence[float], risk_free_daily: float = 0.0, annualization: int = 252) -> float:
    x = np.asarray(daily, dtype=float) - risk_free_daily
    if x.size < 2:
        raise UndefinedMetricError("Sharpe ratio needs at least two observations")
    if annualization <= 0:
        raise DataError("annualization must be positive")
    if np.ptp(x) == 0.0:
        raise UndefinedMetricError("Sharpe ratio undefined: zero standard deviation")
    return float(x.mean() / x.std(ddof=1) * math.sqrt(annualization))


def max_drawdown(equity: Sequence[float]) -> float:
    e = np.asarray(equity, dtype=float)
    if e.size == 0:
        raise DataError("max drawdown of an empty series")
    if np.any(e <= 0):
        raise DataError("equity values must be positive")
    peak = np.maximum.accumulate(e)
    return float(np.max((peak - e) / peak))


def calmar(annualized_return: float, mdd: float, risk_free_annual: float = 0.0) -> float:
    if mdd < 0:
        raise DataError(f"max drawdown must be non-negative, got {mdd}")
    if mdd == 0:
        raise UndefinedMetricError("Calmar ratio undefined: zero max drawdown")
    return (annualized_return - risk_free_annual) / mdd


def confusion(records: Iterable[DailyRecord]) -> tuple[int, int, int, int]:
    """``(tp, tn, fp, fn)`` with up as the positive class; flat days and
    records without a prediction are skipped."""
    tp = tn = fp = fn = 0
    for r in records:
        actual = r.actual_direction
        if actual == FLAT or r.predicted_direction is None:
            continue
        pred_up = Direction(r.predicted_direction) is Direction.UP
        actual_up = actual == Direction.UP.value
        if pred_up and actual_up:
            tp += 1
        elif pred_up:
            fp += 1
        elif actual_up:
            fn += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def acc_mcc(tp: int, tn: int, fp: int, fn: int) -> tuple[float, float]:
    total = tp + tn + fp + fn
    if total == 0:
        raise UndefinedMetricError("no non-flat predicted days")
    acc = (tp + tn) / total
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = 0.0 if denom == 0 else (tp * tn - fp * fn) / math.sqrt(denom)
    return acc, mcc


def classification_metrics(records: Iterable[DailyRecord]) -> tuple[float, float]:
    return acc_mcc(*confusion(records))


@dataclass
class MetricsReport:
    cr: float
    sr: float | None
    mdd: float
    calmar: float | None
    acc: float | None
    mcc: float | None
    annualized_return: float
    n_days: int
    params_echo: dict[str, Any] = field(default_factory=dict)
    status: str = "ok"

    def to_dict(self) -> dict:
        return asdict(self)


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def build_report(records: Sequence[DailyRecord], params_echo: dict | None = None,
                 annualization: int = 252, risk_free_annual: float = 0.0,
                 status: str = "ok") -> MetricsReport:
    """Compute every metric; undefined ratios are reported as ``None``."""
    by_day = daily_returns(records)
    rets = list(by_day.values())
    n = len(rets)
    if n == 0:
        raise DataError("cannot build a report from zero trading days")
    rf_daily = risk_free_annual / annualization
    equity = equity_curve(rets)
    mdd = max_drawdown(equity)
    ann = float(np.mean(rets)) * annualization
    cls = _maybe(classification_metrics, records)
    return MetricsReport(
        cr=cumulative_return(records),
        sr=_maybe(sharpe, rets, rf_daily, annualization),
        mdd=mdd,
        calmar=_maybe(calmar, ann, mdd, risk_free_annual),
        acc=cls[0] if cls else None,
        mcc=cls[1] if cls else None,
        annualized_return=ann,
        n_days=n,
        params_echo=dict(params_echo or {}),
        status=status,
    )
