"""Run configuration: strict JSON schema, defaults and validation.

Unknown keys are rejected with a close-match suggestion, because a typo in
a threshold name would otherwise silently fall back to its default.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agents.backends import RemoteBackend, ScriptedBackend
from .agents.pipeline import DEFAULT_PERSONA_ASSETS, PipelineSettings
from .backtest.baselines import BASELINES
from .backtest.engine import EngineConfig
from .errors import ConfigError, DataError
from .expertise import HashingEmbedder, Persona, RemoteEmbedder
from .market_data import SplitConfig, validate_asset
from .sizing import DEFAULT_BETAS, RiskBetaConfig, RiskLevel, ScaledBeta, SizingParams

SIZING_DEFAULTS = {"eps_alpha": 0.1, "eps_gamma": 0.01, "delta_low": 0.2, "delta_high": 0.85, "temperature": 1.0}
SPLIT_KEYS = ("train_start", "train_end", "test_start", "test_end")
BETA_KEYS = ("alpha", "beta", "a", "b")
BACKEND_KEYS = ("kind", "script", "base_url", "model", "api_key_env", "timeout")
EMBEDDING_KEYS = ("kind", "dim", "base_url", "model", "api_key_env", "timeout")
BASELINE_KEYS = ("kind", "lookback")

TOP_LEVEL = {
    "assets", "events", "expert_cases", "split", "window", "sizing", "risk_beta", "tau_sim",
    "retry_limit", "embedding", "backend", "baseline", "persona_assets", "annualization",
    "risk_free_annual", "use_alignment", "refine_experts", "output_dir", "seed",
}
ALL_KEYS = sorted(TOP_LEVEL | set(SIZING_DEFAULTS) | set(SPLIT_KEYS) | set(BETA_KEYS)
                  | set(BACKEND_KEYS) | set(EMBEDDING_KEYS) | set(BASELINE_KEYS))


def _check_keys(section: dict, allowed, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    for key in section:
        if key not in allowed:
            hint = difflib.get_close_matches(key, ALL_KEYS, n=1, cutoff=0.6)
            msg = f"unknown key {key!r} in {where}"
            if hint:
                msg += f" (did you mean {hint[0]!r}?)"
            raise ConfigError(msg)


def _number(value, name: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return kind(value)


def _path(base: Path, value, name: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{name} must be a path string")
    p = Path(value)
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise ConfigError(f"{name}: path does not exist: {p}")
    return p


def _asset(symbol) -> str:
    try:
        return validate_asset(symbol)
    except DataError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class RunConfig:
    assets: dict[str, Path]
    split: SplitConfig
    events: Path | None = None
    expert_cases: Path | None = None
    window: int = 5
    sizing: dict[str, float] = field(default_factory=lambda: dict(SIZING_DEFAULTS))
    betas: RiskBetaConfig = field(default_factory=RiskBetaConfig)
    tau_sim: float = 0.35
    retry_limit: int = 2
    embedding: dict[str, Any] = field(default_factory=lambda: {"kind": "hashing", "dim": 256})
    backend: dict[str, Any] = field(default_factory=dict)
    baseline: dict[str, Any] = field(default_factory=lambda: {"kind": "momentum", "lookback": 5})
    persona_assets: dict[Persona, str] = field(default_factory=lambda: dict(DEFAULT_PERSONA_ASSETS))
    annualization: int = 252
    risk_free_annual: float = 0.0
    use_alignment: bool = True
    refine_experts: bool = True
    output_dir: Path = Path("out")
    seed: int | None = None
    source: Path | None = None

    def engine_config(self, seed: int | None = None) -> EngineConfig:
        seed = self.seed if seed is None else seed
        if seed is None:
            raise ConfigError("a seed is required for engine runs (config 'seed' or --seed)")
        return EngineConfig(
            window=self.window,
            sizing=SizingParams(**self.sizing, seed=seed),
            betas=self.betas,
            pipeline=PipelineSettings(tau_sim=self.tau_sim, retry_limit=self.retry_limit),
            refine_experts=self.refine_experts,
            use_alignment=self.use_alignment,
            persona_assets=self.persona_assets,
            annualization=self.annualization,
            risk_free_annual=self.risk_free_annual,
        )

    def make_backend(self, override: str | None = None):
        entry = dict(self.backend)
        if override:
            if override == "remote":
                entry["kind"] = "remote"
            elif override.startswith("scripted:"):
                entry = {"kind": "scripted", "script": override.split(":", 1)[1]}
            else:
                raise ConfigError(f"--backend must be 'scripted:PATH' or 'remote', got {override!r}")
        kind = entry.get("kind")
        if kind == "scripted":
            if "script" not in entry:
                raise ConfigError("scripted backend needs 'script'")
            return ScriptedBackend.from_file(entry["script"])
        if kind == "remote":
            for key in ("base_url", "model", "api_key_env"):
                if key not in entry:
                    raise ConfigError(f"remote backend needs backend.{key}")
            return RemoteBackend(entry["base_url"], entry["model"], entry["api_key_env"], entry.get("timeout", 60.0))
        raise ConfigError("no completion backend configured (backend.kind or --backend)")

    def make_embedder(self):
        if self.embedding.get("kind", "hashing") == "hashing":
            return HashingEmbedder(self.embedding.get("dim", 256))
        e = self.embedding
        return RemoteEmbedder(e["base_url"], e["model"], e.get("api_key_env", "OPENAI_API_KEY"), e.get("timeout", 60.0))

    def resolved(self) -> dict:
        """JSON-ready echo with every default filled in."""
        return {
            "assets": {a: str(p) for a, p in sorted(self.assets.items())},
            "events": str(self.events) if self.events else None,
            "expert_cases": str(self.expert_cases) if self.expert_cases else "<bundled sample>",
            "split": {k: getattr(self.split, k) for k in SPLIT_KEYS},
            "window": self.window,
            "sizing": dict(self.sizing),
            "risk_beta": self.betas.to_dict(),
            "tau_sim": self.tau_sim,
            "retry_limit": self.retry_limit,
            "embedding": dict(self.embedding),
            "backend": {k: str(v) for k, v in self.backend.items()},
            "baseline": dict(self.baseline),
            "persona_assets": {Persona(p).value: a for p, a in sorted(self.persona_assets.items())},
            "annualization": self.annualization,
            "risk_free_annual": self.risk_free_annual,
            "use_alignment": self.use_alignment,
            "refine_experts": self.refine_experts,
            "output_dir": str(self.output_dir),
            "seed": self.seed,
        }


def parse_config(raw: dict, base: Path = Path(".")) -> RunConfig:
    _check_keys(raw, TOP_LEVEL, "config")
    if "assets" not in raw or not raw["assets"]:
        raise ConfigError("config needs a non-empty 'assets' map of SYMBOL -> CSV path")
    if "split" not in raw:
        raise ConfigError("config needs a 'split' section")
    if not isinstance(raw["assets"], dict):
        raise ConfigError("assets must map SYMBOL -> CSV path")
    assets = {}
    for sym, p in raw["assets"].items():
        assets[_asset(sym)] = _path(base, p, f"assets.{sym}")

    _check_keys(raw["split"], SPLIT_KEYS, "split")
    missing = [k for k in SPLIT_KEYS if k not in raw["split"]]
    if missing:
        raise ConfigError(f"split is missing {', '.join(missing)}")
    split = SplitConfig(**{k: raw["split"][k] for k in SPLIT_KEYS})

    cfg = RunConfig(assets=assets, split=split, source=None)
    if raw.get("events") is not None:
        cfg.events = _path(base, raw["events"], "events")
    if raw.get("expert_cases") is not None:
        cfg.expert_cases = _path(base, raw["expert_cases"], "expert_cases")
    if "window" in raw:
        cfg.window = _number(raw["window"], "window", int)
        if cfg.window < 1:
            raise ConfigError("window must be a positive integer")

    sizing = raw.get("sizing", {})
    _check_keys(sizing, SIZING_DEFAULTS, "sizing")
    cfg.sizing = {k: _number(sizing.get(k, v), f"sizing.{k}") for k, v in SIZING_DEFAULTS.items()}
    SizingParams(**cfg.sizing)  # range checks

    betas = raw.get("risk_beta", {})
    _check_keys(betas, [lvl.value for lvl in RiskLevel], "risk_beta")
    levels = dict(DEFAULT_BETAS)
    for name, entry in betas.items():
        _check_keys(entry, BETA_KEYS, f"risk_beta.{name}")
        base_sb = DEFAULT_BETAS[RiskLevel(name)]
        vals = {k: _number(entry.get(k, getattr(base_sb, k)), f"risk_beta.{name}.{k}") for k in BETA_KEYS}
        levels[RiskLevel(name)] = ScaledBeta(**vals)
    cfg.betas = RiskBetaConfig(levels)

    if "tau_sim" in raw:
        cfg.tau_sim = _number(raw["tau_sim"], "tau_sim")
        if not -1 <= cfg.tau_sim <= 1:
            raise ConfigError("tau_sim must lie in [-1, 1]")
    if "retry_limit" in raw:
        cfg.retry_limit = _number(raw["retry_limit"], "retry_limit", int)
        if cfg.retry_limit < 0:
            raise ConfigError("retry_limit must be non-negative")

    emb = raw.get("embedding", {"kind": "hashing"})
    _check_keys(emb, EMBEDDING_KEYS, "embedding")
    kind = emb.get("kind", "hashing")
    if kind == "hashing":
        cfg.embedding = {"kind": "hashing", "dim": _number(emb.get("dim", 256), "embedding.dim", int)}
        if cfg.embedding["dim"] < 1:
            raise ConfigError("embedding.dim must be positive")
    elif kind == "remote":
        for key in ("base_url", "model"):
            if key not in emb:
                raise ConfigError(f"remote embedding needs embedding.{key}")
        cfg.embedding = dict(emb)
    else:
        raise ConfigError(f"embedding.kind must be 'hashing' or 'remote', got {kind!r}")

    backend = raw.get("backend", {})
    _check_keys(backend, BACKEND_KEYS, "backend")
    if backend:
        kind = backend.get("kind")
        if kind not in ("scripted", "remote"):
            raise ConfigError(f"backend.kind must be 'scripted' or 'remote', got {kind!r}")
        backend = dict(backend)
        if kind == "scripted":
            backend["script"] = str(_path(base, backend.get("script"), "backend.script"))
        else:
            for key in ("base_url", "model", "api_key_env"):
                if key not in backend:
                    raise ConfigError(f"remote backend needs backend.{key}")
            backend["timeout"] = _number(backend.get("timeout", 60.0), "backend.timeout")
    cfg.backend = backend

    baseline = raw.get("baseline", {})
    _check_keys(baseline, BASELINE_KEYS, "baseline")
    cfg.baseline = {"kind": baseline.get("kind", "momentum"),
                    "lookback": _number(baseline.get("lookback", 5), "baseline.lookback", int)}
    if cfg.baseline["kind"] not in BASELINES:
        raise ConfigError(f"baseline.kind must be one of {', '.join(BASELINES)}")
    if cfg.baseline["lookback"] < 1:
        raise ConfigError("baseline.lookback must be >= 1")

    if "persona_assets" in raw:
        pa = raw["persona_assets"]
        _check_keys(pa, [p.value for p in Persona], "persona_assets")
        cfg.persona_assets = {Persona(k): _asset(v) for k, v in pa.items()}
    if "annualization" in raw:
        cfg.annualization = _number(raw["annualization"], "annualization", int)
        if cfg.annualization < 1:
            raise ConfigError("annualization must be positive")
    if "risk_free_annual" in raw:
        cfg.risk_free_annual = _number(raw["risk_free_annual"], "risk_free_annual")
    for flag in ("use_alignment", "refine_experts"):
        if flag in raw:
            if not isinstance(raw[flag], bool):
                raise ConfigError(f"{flag} must be true or false")
            setattr(cfg, flag, raw[flag])
    if "output_dir" in raw:
        out = Path(raw["output_dir"])
        cfg.output_dir = out if out.is_absolute() else base / out
    if raw.get("seed") is not None:
        cfg.seed = _number(raw["seed"], "seed", int)
        if not 0 <= cfg.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    cfg = parse_config(raw, path.parent)
    cfg.source = path
    return cfg
