import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expertrade.backtest.metrics import (
    DailyRecord,
    acc_mcc,
    build_report,
    calmar,
    classification_metrics,
    cumulative_return,
    equity_curve,
    max_drawdown,
    sharpe,
)
from expertrade.backtest.engine import apply_decision
from expertrade.errors import DataError, UndefinedMetricError
from expertrade.sizing import Action, Decision, Direction


def rec(date, exposure, r, pred=None, window_end=None):
    return DailyRecord(date, "AAPL", "long", exposure, r, pred, window_end)


def brute_mdd(e):
    best = 0.0
    for i in range(len(e)):
        for j in range(i, len(e)):
            best = max(best, (e[i] - e[j]) / e[i])
    return best


class TestApplyDecision:
    def test_transitions(self):
        s = apply_decision({}, "A", Decision(Action.LONG, 0.6))
        assert s == {"A": 0.6}
        assert apply_decision(s, "A", Decision(Action.HOLD, 0.1)) == {"A": 0.6}
        assert apply_decision(s, "A", Decision(Action.CLOSE, 0.9)) == {"A": 0.0}
        assert apply_decision(s, "A", Decision(Action.SHORT, 0.3)) == {"A": -0.3}
        assert apply_decision({}, "A", Decision(Action.HOLD, 0.1)) == {"A": 0.0}


class TestCumulativeReturn:
    def test_two_ten_percent_days(self):
        records = [rec("2023-01-03", 1.0, math.log(110 / 100)), rec("2023-01-04", 1.0, math.log(121 / 110))]
        assert cumulative_return(records) == pytest.approx(0.190620359608649720, abs=1e-12)

    def test_flat_exposure(self):
        assert cumulative_return([rec("2023-01-03", 0.0, 0.05), rec("2023-01-04", 0.0, -0.2)]) == 0.0

    def test_short_gain(self):
        assert cumulative_return([rec("2023-01-03", -1.0, math.log(0.9))]) == pytest.approx(
            0.105360515657826301, abs=1e-15)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-0.2, 0.2)), min_size=2, max_size=60),
           st.integers(1, 59))
    def test_additive_and_equity(self, rows, cut):
        cut = min(cut, len(rows) - 1)
        records = [rec(f"2023-{1 + i // 28:02d}-{1 + i % 28:02d}", e, r) for i, (e, r) in enumerate(rows)]
        whole = cumulative_return(records)
        assert cumulative_return(records[:cut]) + cumulative_return(records[cut:]) == pytest.approx(whole, abs=1e-12)
        eq = equity_curve([x.strategy_return for x in records])
        assert eq[-1] / eq[0] == pytest.approx(math.exp(whole), rel=1e-9)


class TestSharpe:
    def test_constant_raises(self):
        with pytest.raises(UndefinedMetricError):
            sharpe([0.001] * 30)

    def test_symmetric_is_zero(self):
        assert sharpe([0.01, -0.01] * 126) == pytest.approx(0.0, abs=1e-12)

    def test_known_value(self):
        x = [0.01, 0.02, 0.03]
        assert sharpe(x, annualization=1) == pytest.approx(0.02 / 0.01, abs=1e-12)

    def test_monte_carlo(self):
        rng = np.random.default_rng(2024)
        n = 1000
        target = 0.793725393319377177
        se = math.sqrt((1 + 0.05**2 / 2) / n) * math.sqrt(252)
        sr = sharpe(rng.normal(0.0005, 0.01, size=n))
        assert abs(sr - target) < 3 * se

    def test_too_short(self):
        with pytest.raises(UndefinedMetricError):
            sharpe([0.1])


class TestMaxDrawdown:
    def test_examples(self):
        assert max_drawdown([100, 120, 90, 110]) == pytest.approx(0.25, abs=1e-15)
        assert max_drawdown([1, 2, 3, 4]) == 0.0

    def test_random_walks(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            e = np.exp(np.cumsum(rng.normal(0, 0.02, size=300)))
            assert max_drawdown(e) == pytest.approx(brute_mdd(e), abs=1e-15)

    @pytest.mark.parametrize("bad", [[], [1.0, 0.0], [1.0, -2.0]])
    def test_errors(self, bad):
        with pytest.raises(DataError):
            max_drawdown(bad)


class TestCalmar:
    def test_values(self):
        assert calmar(0.30, 0.25) == pytest.approx(1.2, abs=1e-15)
        assert calmar(-0.1, 0.2) < 0

    def test_zero_mdd(self):
        with pytest.raises(UndefinedMetricError):
            calmar(0.1, 0.0)


class TestClassification:
    def test_all_correct(self):
        records = [rec("2023-01-03", 1, 0.01, "up"), rec("2023-01-04", 1, -0.01, "down")]
        assert classification_metrics(records) == (1.0, 1.0)

    def test_confusion_arithmetic(self):
        acc, mcc = acc_mcc(3, 2, 1, 0)
        assert acc == pytest.approx(0.833333333333333333, abs=1e-15)
        assert mcc == pytest.approx((3 * 2 - 1 * 0) / math.sqrt(4 * 3 * 3 * 2), abs=1e-15)

    def test_zero_denominator(self):
        records = [rec(f"2023-01-0{i}", 1, 0.01, Direction.UP) for i in range(3, 8)]
        assert classification_metrics(records) == (1.0, 0.0)

    def test_flat_days_excluded(self):
        records = [rec("2023-01-03", 1, 0.0, "down"), rec("2023-01-04", 1, 0.02, "up"),
                   rec("2023-01-05", 1, -0.02, "up")]
        assert classification_metrics(records)[0] == 0.5

    def test_all_flat(self):
        with pytest.raises(UndefinedMetricError):
            classification_metrics([rec("2023-01-03", 1, 0.0, "up")])

    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
    def test_mcc_bounded(self, tp, tn, fp, fn):
        if tp + tn + fp + fn == 0:
            return
        acc, mcc = acc_mcc(tp, tn, fp, fn)
        assert 0 <= acc <= 1 and -1 - 1e-12 <= mcc <= 1 + 1e-12


class TestRecord:
    def test_lookahead_audit(self):
        with pytest.raises(AssertionError):
            rec("2023-01-03", 1, 0.01, "up", window_end="2023-01-03")
        rec("2023-01-03", 1, 0.01, "up", window_end="2023-01-02")

    def test_non_finite(self):
        with pytest.raises(DataError):
            rec("2023-01-03", 1, float("nan"))


class TestReport:
    def test_flat_run(self):
        records = [rec(f"2023-01-0{i}", 0.0, 0.01 * (-1) ** i, "up") for i in range(3, 9)]
        report = build_report(records, {"seed": 1})
        assert report.cr == 0.0 and report.mdd == 0.0
        assert report.sr is None and report.calmar is None
        assert report.params_echo == {"seed": 1}
        assert report.n_days == 6

    def test_empty(self):
        with pytest.raises(DataError):
            build_report([])
