from .baselines import (
    BASELINES,
    MarkowitzMeanVariance,
    MeanReversionStrategy,
    MomentumStrategy,
    run_baseline,
)
from .engine import (
    ABLATIONS,
    BacktestFailure,
    BacktestResult,
    EngineConfig,
    ablate,
    apply_decision,
    run_portfolio,
    run_single_asset,
)
from .metrics import (
    DailyRecord,
    MetricsReport,
    build_report,
    calmar,
    classification_metrics,
    cumulative_return,
    equity_curve,
    max_drawdown,
    sharpe,
)

__all__ = [
    "ABLATIONS", "BASELINES", "BacktestFailure", "BacktestResult", "DailyRecord", "EngineConfig",
    "MarkowitzMeanVariance", "MeanReversionStrategy", "MetricsReport", "MomentumStrategy",
    "ablate", "apply_decision", "build_report", "calmar", "classification_metrics",
    "cumulative_return", "equity_curve", "max_drawdown", "run_baseline", "run_portfolio",
    "run_single_asset", "sharpe",
]
