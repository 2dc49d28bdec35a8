"""Report, equity-curve and record files."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .metrics import DailyRecord, MetricsReport, daily_returns, equity_curve

EQUITY_HEADER = ["date", "action", "exposure", "log_return", "equity"]
RECORD_HEADER = [
    "date", "asset", "action", "exposure", "log_return", "predicted", "actual",
    "w", "rho", "alpha", "gamma", "risk_level", "case_id", "degraded",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    if hasattr(x, "value"):
        return str(x.value)
    return str(x)


def report_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def write_report(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(report_json(report))


def write_equity(records: Sequence[DailyRecord], path: str | Path) -> None:
    """One row per date; multi-asset days report gross exposure and action ``portfolio``."""
    by_day = daily_returns(records)
    equity = equity_curve(list(by_day.values()))[1:]
    per_date: dict[str, list[DailyRecord]] = {}
    for r in records:
        per_date.setdefault(r.date, []).append(r)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EQUITY_HEADER)
        for (date, ret), eq in zip(by_day.items(), equity):
            day = per_date[date]
            if len(day) == 1:
                action, exposure = day[0].action, day[0].exposure_after
            else:
                action, exposure = "portfolio", sum(abs(r.exposure_after) for r in day)
            w.writerow([date, action, repr(exposure), repr(ret), repr(float(eq))])


def write_records(records: Sequence[DailyRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow([_fmt(v) for v in (
                r.date, r.asset, r.action, r.exposure_after, r.log_return_realized,
                r.predicted_direction, r.actual_direction, r.w, r.rho, r.alpha, r.gamma,
                r.risk_level, r.case_id, int(r.degraded),
            )])


def write_forecasts(records: Sequence[DailyRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "predicted", "actual"])
        for r in records:
            w.writerow([r.date, _fmt(r.predicted_direction), r.actual_direction])


def write_outputs(out_dir: str | Path, report: MetricsReport, records: Sequence[DailyRecord],
                  prefix: str = "") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / f"{prefix}report.json",
        "equity": out / f"{prefix}equity.csv",
        "records": out / f"{prefix}records.csv",
    }
    write_report(report, paths["report"])
    if records:
        write_equity(records, paths["equity"])
        write_records(records, paths["records"])
    return paths
