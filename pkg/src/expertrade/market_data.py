"""Daily OHLCV bars, event documents, look-back windows and date splits.

Dates are ISO-8601 ``YYYY-MM-DD`` strings throughout; their lexicographic
order is their chronological order, so no datetime parsing is needed in
the hot paths. Non-trading days are simply absent rows.
"""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, InsufficientHistoryError

BAR_HEADER = ["Date", "Open", "High", "Low", "Close", "Volume"]
_ASSET_RE = re.compile(r"[A-Z0-9]{1,12}")


def validate_asset(symbol: str) -> str:
    if not isinstance(symbol, str) or not _ASSET_RE.fullmatch(symbol):
        raise DataError(f"invalid asset id {symbol!r}: expected [A-Z0-9]{{1,12}}")
    return symbol


def validate_date(value: str) -> str:
    """Return ``value`` if it is a canonical ``YYYY-MM-DD`` date string."""
    try:
        parsed = dt.date.fromisoformat(value)
    except (TypeError, ValueError):
        raise DataError(f"invalid date {value!r}: expected YYYY-MM-DD") from None
    if parsed.isoformat() != value:
        raise DataError(f"invalid date {value!r}: expected YYYY-MM-DD")
    return value


@dataclass(frozen=True)
class Bar:
    date: str
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            raise DataError(f"{self.date}: prices must be finite and positive")
        if not (math.isfinite(self.volume) and self.volume >= 0):
            raise DataError(f"{self.date}: volume must be finite and non-negative")
        if self.low > min(self.open, self.close):
            raise DataError(f"{self.date}: low {self.low} exceeds min(open, close)")
        if self.high < max(self.open, self.close):
            raise DataError(f"{self.date}: high {self.high} below max(open, close)")


@dataclass(frozen=True)
class BarSeries:
    asset: str
    bars: tuple[Bar, ...]

    def __post_init__(self):
        validate_asset(self.asset)
        object.__setattr__(self, "bars", tuple(self.bars))
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise DataError(
                    f"{self.asset}: dates must be strictly increasing "
                    f"({prev.date} then {cur.date})"
                )

    def __len__(self):
        return len(self.bars)

    def __getitem__(self, idx):
        return self.bars[idx]

    def __iter__(self):
        return iter(self.bars)

    @cached_property
    def _date_keys(self) -> tuple[str, ...]:
        return tuple(b.date for b in self.bars)

    @property
    def dates(self) -> list[str]:
        return list(self._date_keys)

    @property
    def closes(self) -> np.ndarray:
        return np.array([b.close for b in self.bars], dtype=float)

    def index_of(self, date: str) -> int:
        """Position of the first bar whose date is >= ``date``."""
        return bisect.bisect_left(self._date_keys, date)

    def between(self, start: str, end: str) -> "BarSeries":
        """Bars with ``start <= date <= end``."""
        return BarSeries(self.asset, tuple(b for b in self.bars if start <= b.date <= end))


@dataclass(frozen=True)
class EventDoc:
    date: str
    source: str
    text: str
    asset_scope: str | None = None

    def __post_init__(self):
        validate_date(self.date)
        if not isinstance(self.text, str) or not self.text.strip():
            raise DataError(f"event on {self.date}: text must be non-empty")
        if self.asset_scope is not None:
            validate_asset(self.asset_scope)

    @property
    def is_macro(self) -> bool:
        return self.asset_scope is None


@dataclass(frozen=True)
class DataWindow:
    """The ``n`` trailing bars strictly before ``asof`` plus the events in that span."""

    asof: str
    asset: str
    bars: tuple[Bar, ...]
    events: tuple[EventDoc, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.bars:
            raise DataError("a window needs at least one bar")
        if self.bars[-1].date >= self.asof:
            raise DataError(f"window for {self.asof} contains bar {self.bars[-1].date}")
        if any(e.date >= self.asof for e in self.events):
            raise DataError(f"window for {self.asof} contains an event on or after asof")

    @property
    def start(self) -> str:
        return self.bars[0].date

    @property
    def end(self) -> str:
        return self.bars[-1].date


@dataclass(frozen=True)
class SplitConfig:
    train_start: str
    train_end: str
    test_start: str
    test_end: str

    def __post_init__(self):
        for name in ("train_start", "train_end", "test_start", "test_end"):
            try:
                validate_date(getattr(self, name))
            except DataError as exc:
                raise ConfigError(f"{name}: {exc}") from None
        if self.train_start > self.train_end:
            raise ConfigError("train_start must not be after train_end")
        if self.test_start > self.test_end:
            raise ConfigError("test_start must not be after test_end")
        if self.train_end >= self.test_start:
            raise ConfigError(
                f"train_end ({self.train_end}) must be before test_start ({self.test_start})"
            )


# Loading and writing

def _parse_float(raw: str, column: str, lineno: int) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise DataError(f"line {lineno}: cannot parse {column}={raw!r}") from None


def load_bars(path: str | Path, asset: str) -> BarSeries:
    """Read a ``Date,Open,High,Low,Close,Volume`` CSV into a sorted, validated series."""
    validate_asset(asset)
    path = Path(path)
    if not path.is_file():
        raise DataError(f"bar file not found: {path}")
    bars = []
    seen: dict[str, int] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != BAR_HEADER:
            raise DataError(f"{path}: header must be {','.join(BAR_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(BAR_HEADER):
                raise DataError(f"{path}: line {lineno}: expected 6 fields, got {len(row)}")
            date = row[0].strip()
            try:
                validate_date(date)
                values = [_parse_float(v.strip(), c, lineno) for v, c in zip(row[1:], BAR_HEADER[1:])]
                bar = Bar(date, *values)
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            if date in seen:
                raise DataError(
                    f"{path}: line {lineno}: duplicate date {date} (first on line {seen[date]})"
                )
            seen[date] = lineno
            bars.append(bar)
    bars.sort(key=lambda b: b.date)
    return BarSeries(asset, tuple(bars))


def write_bars(series: BarSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BAR_HEADER)
        for b in series:
            writer.writerow([b.date, repr(b.open), repr(b.high), repr(b.low), repr(b.close), repr(b.volume)])


def load_events(path: str | Path) -> list[EventDoc]:
    """Parse line-delimited JSON event records, returned in stable date order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"event file not found: {path}")
    events = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}: line {lineno}: record must be an object")
            missing = [k for k in ("date", "source", "text") if k not in rec]
            if missing:
                raise DataError(f"{path}: line {lineno}: missing field(s) {', '.join(missing)}")
            unknown = set(rec) - {"date", "source", "text", "asset"}
            if unknown:
                raise DataError(f"{path}: line {lineno}: unknown field(s) {', '.join(sorted(unknown))}")
            try:
                events.append(
                    EventDoc(
                        date=str(rec["date"]),
                        source=str(rec["source"]),
                        text=rec["text"] if isinstance(rec["text"], str) else "",
                        asset_scope=rec.get("asset"),
                    )
                )
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    # list.sort is stable, so same-date records keep file order
    events.sort(key=lambda e: e.date)
    return events


def write_events(events: Iterable[EventDoc], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for e in events:
            rec = {"date": e.date, "source": e.source, "text": e.text}
            if e.asset_scope is not None:
                rec["asset"] = e.asset_scope
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# Windows, splits, returns

def make_window(series: BarSeries, events: Sequence[EventDoc], asof: str, n: int) -> DataWindow:
    """Build the no-lookahead window of ``n`` bars ending at the last date before ``asof``.

    Events are kept when they fall inside the window's date span, are dated
    strictly before ``asof`` and are either macro or scoped to this asset.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError(f"window length must be a positive integer, got {n!r}")
    end = series.index_of(asof)
    if end < n:
        raise InsufficientHistoryError(
            f"{series.asset}: need {n} bars before {asof}, have {end}"
        )
    bars = series.bars[end - n:end]
    start = bars[0].date
    kept = tuple(
        e for e in events
        if start <= e.date < asof and (e.asset_scope is None or e.asset_scope == series.asset)
    )
    return DataWindow(asof=asof, asset=series.asset, bars=bars, events=kept)


def split(series: BarSeries, cfg: SplitConfig) -> tuple[BarSeries, BarSeries]:
    train = series.between(cfg.train_start, cfg.train_end)
    test = series.between(cfg.test_start, cfg.test_end)
    if not len(train):
        raise DataError(f"{series.asset}: empty training partition")
    if not len(test):
        raise DataError(f"{series.asset}: empty test partition")
    return train, test


def log_return(p_t: float, p_next: float) -> float:
    if not (p_t > 0 and p_next > 0):
        raise DataError(f"log return needs positive prices, got {p_t}, {p_next}")
    return math.log(p_next / p_t)


# Synthetic generators

def business_days(start: str, count: int) -> list[str]:
    """``count`` consecutive Monday-Friday dates starting at (or after) ``start``."""
    day = dt.date.fromisoformat(start)
    out = []
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day.isoformat())
        day += dt.timedelta(days=1)
    return out


def bars_from_closes(asset: str, dates: Sequence[str], closes: Sequence[float], volume: float = 1e6) -> BarSeries:
    """Series whose open equals the previous close; high/low bracket the body by 0.5%."""
    bars = []
    prev = closes[0]
    for date, close in zip(dates, closes):
        o = prev
        bars.append(Bar(date, o, max(o, close) * 1.005, min(o, close) * 0.995, close, volume))
        prev = close
    return BarSeries(asset, tuple(bars))


def synthetic_bars(
    asset: str,
    n: int,
    start: str = "2023-01-02",
    drift: float = 0.0003,
    vol: float = 0.015,
    seed: int = 0,
    price0: float = 100.0,
) -> BarSeries:
    """Geometric random walk on business days. ``vol=0`` gives a deterministic trend."""
    rng = np.random.default_rng(seed)
    rets = drift + vol * rng.standard_normal(n)
    rets[0] = 0.0
    closes = price0 * np.exp(np.cumsum(rets))
    return bars_from_closes(asset, business_days(start, n), closes.tolist())


def synthetic_events(dates: Sequence[str], counts: Sequence[int], seed: int = 0,
                     assets: Sequence[str | None] = (None,)) -> list[EventDoc]:
    """``counts[i]`` events on ``dates[i]`` with templated headlines."""
    rng = np.random.default_rng(seed)
    topics = ["rates", "inflation", "earnings", "supply chain", "guidance", "tariffs", "jobs"]
    moods = ["beats expectations", "misses forecasts", "holds steady", "surprises markets"]
    sources = ["Reuters", "Bloomberg", "AP", "Fed"]
    out = []
    for date, k in zip(dates, counts):
        for _ in range(k):
            topic = topics[rng.integers(len(topics))]
            mood = moods[rng.integers(len(moods))]
            scope = assets[rng.integers(len(assets))]
            out.append(EventDoc(date, sources[rng.integers(len(sources))], f"{topic} report {mood}", scope))
    return out
