"""Expert-informed, risk-aware multi-agent trading decisions and backtests."""

from .errors import (
    BackendError,
    ConfigError,
    DataError,
    ExpertradeError,
    ParseError,
    UndefinedMetricError,
)

__version__ = "0.1.0"
