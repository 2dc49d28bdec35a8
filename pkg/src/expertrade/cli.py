"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .backtest.baselines import BASELINES, run_baseline
from .backtest.engine import ABLATIONS, BacktestFailure, ablate, run_portfolio, run_single_asset
from .backtest.report import write_forecasts, write_outputs
from .config import RunConfig, load_config
from .errors import BackendError, ConfigError, DataError, UndefinedMetricError
from .expertise import ExpertStore
from .market_data import load_bars, load_events, split

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

log = logging.getLogger("expertrade")


def _seed(value: str) -> int:
    try:
        seed = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {value!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=_seed, help="master seed (overrides config)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--backend", help="'scripted:PATH' or 'remote' (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="expertrade", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a config and print it with defaults")

    p = sub.add_parser("forecast", parents=[common], help="direction forecasts with ACC/MCC")
    p.add_argument("--asset", help="asset symbol (default: the only configured asset)")
    p.add_argument("--start", help="first forecast date (default: split.test_start)")
    p.add_argument("--end", help="last forecast date (default: split.test_end)")

    p = sub.add_parser("backtest", parents=[common], help="single-asset trading backtest")
    p.add_argument("--asset", help="asset symbol (default: the only configured asset)")
    p.add_argument("--baseline", choices=BASELINES, help="run a baseline instead of the agents")
    p.add_argument("--ablate", choices=ABLATIONS, help="disable one component")

    p = sub.add_parser("portfolio", parents=[common], help="multi-asset long-short backtest")
    p.add_argument("--baseline", choices=BASELINES, help="run a baseline instead of the agents")
    p.add_argument("--ablate", choices=ABLATIONS, help="disable one component")

    p = sub.add_parser("ablate", parents=[common], help="run one ablation variant")
    p.add_argument("variant", choices=ABLATIONS)
    p.add_argument("--asset", help="single asset; omit to run the portfolio")

    p = sub.add_parser("baseline", parents=[common], help="run a baseline strategy")
    p.add_argument("kind", nargs="?", choices=BASELINES, help="default: config baseline.kind")
    p.add_argument("--asset", help="restrict to one asset")
    p.add_argument("--lookback", type=int, help="default: config baseline.lookback")
    return parser


def _pick_asset(cfg: RunConfig, asset: str | None) -> str:
    if asset is None:
        if len(cfg.assets) != 1:
            raise ConfigError(f"--asset is required when several assets are configured ({', '.join(cfg.assets)})")
        return next(iter(cfg.assets))
    if asset not in cfg.assets:
        raise ConfigError(f"asset {asset!r} is not configured")
    return asset


def _load_data(cfg: RunConfig, assets):
    series = {a: load_bars(cfg.assets[a], a) for a in assets}
    events = load_events(cfg.events) if cfg.events else []
    return series, events


def _load_store(cfg: RunConfig) -> ExpertStore:
    embedder = cfg.make_embedder()
    if cfg.expert_cases:
        return ExpertStore.load(cfg.expert_cases, embedder)
    return ExpertStore.sample(embedder)


def _echo(cfg: RunConfig, seed) -> dict:
    resolved = cfg.resolved()
    resolved["seed"] = seed
    return {"config": resolved}


def _emit(out_dir: Path, prefix: str, result_report, records) -> None:
    paths = write_outputs(out_dir, result_report, records, prefix)
    print(json.dumps({k: str(v) for k, v in paths.items()}, sort_keys=True))


def _run_engine(args, cfg: RunConfig, variant: str | None, assets: list[str], prefix: str, portfolio: bool):
    engine_cfg = cfg.engine_config(args.seed)
    if variant:
        engine_cfg = ablate(engine_cfg, variant)
    backend = cfg.make_backend(args.backend)
    series, events = _load_data(cfg, assets)
    store = _load_store(cfg)
    out_dir = args.out or cfg.output_dir
    extra = _echo(cfg, engine_cfg.seed)
    extra["ablation"] = variant
    try:
        if portfolio:
            result = run_portfolio([series[a] for a in assets], events, store, backend, engine_cfg,
                                   cfg.split.test_start, cfg.split.test_end)
        else:
            (asset,) = assets
            result = run_single_asset(series[asset], events, store, backend, engine_cfg,
                                      cfg.split.test_start, cfg.split.test_end)
    except BacktestFailure as exc:
        if exc.partial is not None:
            exc.partial.report.params_echo.update(extra)
            _emit(out_dir, prefix, exc.partial.report, exc.partial.records)
        raise
    result.report.params_echo.update(extra)
    _emit(out_dir, prefix, result.report, result.records)
    return result


def _run_baseline(args, cfg: RunConfig, kind: str, assets: list[str], prefix: str, lookback: int | None = None):
    series, _ = _load_data(cfg, assets)
    train, test = {}, {}
    for a, s in series.items():
        train[a], test[a] = split(s, cfg.split)
    lookback = lookback or cfg.baseline["lookback"]
    report, records = run_baseline(kind, train, test, lookback, _echo(cfg, cfg.seed if args.seed is None else args.seed),
                                   cfg.annualization, cfg.risk_free_annual)
    _emit(args.out or cfg.output_dir, prefix, report, records)
    return report


def cmd_validate(args, cfg: RunConfig) -> int:
    resolved = cfg.resolved()
    if args.seed is not None:
        resolved["seed"] = args.seed
    print(json.dumps(resolved, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_forecast(args, cfg: RunConfig) -> int:
    asset = _pick_asset(cfg, args.asset)
    engine_cfg = cfg.engine_config(args.seed)
    backend = cfg.make_backend(args.backend)
    series, events = _load_data(cfg, [asset])
    start = args.start or cfg.split.test_start
    end = args.end or cfg.split.test_end
    result = run_single_asset(series[asset], events, _load_store(cfg), backend, engine_cfg, start, end)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_forecasts(result.records, out / f"forecast_{asset}.csv")
    summary = {"asset": asset, "acc": result.report.acc, "mcc": result.report.mcc,
               "n_days": result.report.n_days, **_echo(cfg, engine_cfg.seed)}
    (out / f"forecast_{asset}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"acc": summary["acc"], "mcc": summary["mcc"], "n_days": summary["n_days"]}, sort_keys=True))
    return EXIT_OK


def cmd_backtest(args, cfg: RunConfig) -> int:
    asset = _pick_asset(cfg, args.asset)
    if args.baseline:
        if args.baseline == "markowitz":
            raise ConfigError("the Markowitz baseline needs several assets; use 'portfolio --baseline markowitz'")
        _run_baseline(args, cfg, args.baseline, [asset], f"baseline_{args.baseline}_{asset}_")
        return EXIT_OK
    tag = f"_{args.ablate}" if args.ablate else ""
    _run_engine(args, cfg, args.ablate, [asset], f"backtest_{asset}{tag}_", portfolio=False)
    return EXIT_OK


def cmd_portfolio(args, cfg: RunConfig) -> int:
    assets = sorted(cfg.assets)
    if args.baseline:
        _run_baseline(args, cfg, args.baseline, assets, f"baseline_{args.baseline}_portfolio_")
        return EXIT_OK
    tag = f"_{args.ablate}" if args.ablate else ""
    _run_engine(args, cfg, args.ablate, assets, f"portfolio{tag}_", portfolio=True)
    return EXIT_OK


def cmd_ablate(args, cfg: RunConfig) -> int:
    if args.asset:
        asset = _pick_asset(cfg, args.asset)
        _run_engine(args, cfg, args.variant, [asset], f"ablate_{args.variant}_{asset}_", portfolio=False)
    else:
        _run_engine(args, cfg, args.variant, sorted(cfg.assets), f"ablate_{args.variant}_portfolio_", portfolio=True)
    return EXIT_OK


def cmd_baseline(args, cfg: RunConfig) -> int:
    kind = args.kind or cfg.baseline["kind"]
    assets = [_pick_asset(cfg, args.asset)] if args.asset else sorted(cfg.assets)
    tag = args.asset or "portfolio"
    _run_baseline(args, cfg, kind, assets, f"baseline_{kind}_{tag}_", args.lookback)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "portfolio": cmd_portfolio,
    "ablate": cmd_ablate,
    "baseline": cmd_baseline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, UndefinedMetricError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
