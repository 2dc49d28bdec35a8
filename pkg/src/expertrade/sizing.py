"""Risk-aware position sizing and action selection.

A day's discrete risk level picks a scaled Beta distribution from which a
sensitivity ``rho`` is drawn. The position score multiplies ``rho`` by the
floored expert reliability and the square root of the floored event
similarity. Two thresholds turn the score and the predicted direction into
one of long / short / hold / close, and across several assets the scores
are turned into weights with a temperature softmax.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .errors import ConfigError, DataError

MASK64 = (1 << 64) - 1


class RiskLevel(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


class Action(str, Enum):
    LONG = "long"
    SHORT = "short"
    HOLD = "hold"
    CLOSE = "close"


# Seeding

def splitmix64(state: int) -> tuple[int, int]:
    """One step of SplitMix64: returns ``(next_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seeds(master: int, count: int) -> list[int]:
    """``count`` independent 64-bit stream seeds derived from ``master``."""
    state = master & MASK64
    out = []
    for _ in range(count):
        state, value = splitmix64(state)
        out.append(value)
    return out


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the same seed yields the same stream on every platform."""
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def stream_rngs(master: int, count: int) -> list[np.random.Generator]:
    return [make_rng(s) for s in derive_seeds(master, count)]


# Configuration

@dataclass(frozen=True)
class ScaledBeta:
    alpha: float
    beta: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError(f"Beta shapes must be positive, got ({self.alpha}, {self.beta})")
        # a == b is allowed as a point mass
        if not (0.0 <= self.a <= self.b <= 1.0):
            raise ConfigError(f"support must satisfy 0 <= a <= b <= 1, got [{self.a}, {self.b}]")

    @property
    def mean(self) -> float:
        return self.a + (self.b - self.a) * self.alpha / (self.alpha + self.beta)


DEFAULT_BETAS = {
    RiskLevel.LOW: ScaledBeta(5.0, 2.0, 0.75, 0.9),
    RiskLevel.MEDIUM: ScaledBeta(3.0, 3.0, 0.4, 0.75),
    RiskLevel.HIGH: ScaledBeta(2.0, 5.0, 0.1, 0.4),
}


@dataclass(frozen=True)
class RiskBetaConfig:
    levels: Mapping[RiskLevel, ScaledBeta] = field(default_factory=lambda: dict(DEFAULT_BETAS))

    def __post_init__(self):
        levels = {RiskLevel(k): v for k, v in self.levels.items()}
        missing = set(RiskLevel) - set(levels)
        if missing:
            raise ConfigError(f"missing Beta config for {sorted(m.value for m in missing)}")
        object.__setattr__(self, "levels", levels)

    def __getitem__(self, level) -> ScaledBeta:
        return self.levels[RiskLevel(level)]

    @property
    def min_support(self) -> float:
        return min(sb.a for sb in self.levels.values())

    def to_dict(self) -> dict:
        return {lvl.value: asdict(sb) for lvl, sb in sorted(self.levels.items(), key=lambda kv: kv[0].value)}


@dataclass(frozen=True)
class SizingParams:
    eps_alpha: float = 0.1
    eps_gamma: float = 0.01
    delta_low: float = 0.2
    delta_high: float = 0.85
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("eps_alpha", "eps_gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if not 0.0 < self.delta_low < self.delta_high < 1.0:
            raise ConfigError(
                f"need 0 < delta_low < delta_high < 1, got {self.delta_low}, {self.delta_high}"
            )
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Decision:
    action: Action
    size: float
    rho: float | None = None
    alpha: float | None = None
    gamma: float | None = None


# Core maths

def sample_rho(level, cfg: RiskBetaConfig, rng: np.random.Generator, size=None):
    """Draw sensitivity score(s) ``a + (b - a) * Beta(alpha, beta)`` for ``level``."""
    sb = cfg[level]
    if sb.a == sb.b:
        return sb.a if size is None else np.full(size, sb.a)
    x = rng.beta(sb.alpha, sb.beta, size=size)
    rho = sb.a + (sb.b - sb.a) * x
    return float(rho) if size is None else rho


def position_score(rho: float, alpha: float, gamma: float, params: SizingParams) -> float:
    """``rho * max(alpha, eps_alpha) * sqrt(max(gamma, eps_gamma))``."""
    for name, v in (("rho", rho), ("alpha", alpha), ("gamma", gamma)):
        if not 0.0 <= v <= 1.0:  # also rejects NaN
            raise DataError(f"{name} must lie in [0, 1], got {v}")
    return rho * max(alpha, params.eps_alpha) * math.sqrt(max(gamma, params.eps_gamma))


def select_action(direction: Direction, w: float, params: SizingParams) -> Decision:
    direction = Direction(direction)
    if w > params.delta_high:
        action = Action.CLOSE
    elif w < params.delta_low:
        action = Action.HOLD
    elif direction is Direction.UP:
        action = Action.LONG
    else:
        action = Action.SHORT
    return Decision(action, w)


def allocate(scores: Sequence[tuple[str, float]], temperature: float) -> list[tuple[str, float]]:
    """Temperature softmax over ``(asset, score)`` pairs."""
    if not scores:
        raise DataError("allocate needs at least one asset")
    if not temperature > 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    names = [name for name, _ in scores]
    z = np.array([s for _, s in scores], dtype=float) / temperature
    z -= z.max()
    e = np.exp(z)
    weights = e / e.sum()
    return list(zip(names, weights.tolist()))


def portfolio_decisions(entries: Sequence[tuple[str, Action, float]], temperature: float) -> dict[str, float]:
    """Signed exposure per asset from ``(asset, action, score)`` triples.

    Only long/short assets enter the softmax; hold/close assets get zero.
    """
    exposures = {asset: 0.0 for asset, _, _ in entries}
    active = [(asset, Action(action), score) for asset, action, score in entries
              if Action(action) in (Action.LONG, Action.SHORT)]
    if not active:
        return exposures
    weights = dict(allocate([(asset, score) for asset, _, score in active], temperature))
    for asset, action, _ in active:
        exposures[asset] = weights[asset] if action is Action.LONG else -weights[asset]
    return exposures


class RiskAwareSizer(BaseEstimator):
    """Estimator wrapper around the sizing rules.

    ``X`` has columns ``(rho, alpha, gamma)``; ``predict`` returns position
    scores and ``decide`` maps scores plus directions to actions. Stateless,
    so ``fit`` only validates parameters.
    """

    def __init__(self, eps_alpha=0.1, eps_gamma=0.01, delta_low=0.2, delta_high=0.85, temperature=1.0):
        self.eps_alpha = eps_alpha
        self.eps_gamma = eps_gamma
        self.delta_low = delta_low
        self.delta_high = delta_high
        self.temperature = temperature

    def _params(self) -> SizingParams:
        return SizingParams(self.eps_alpha, self.eps_gamma, self.delta_low, self.delta_high, self.temperature)

    def fit(self, X=None, y=None):
        self.params_ = self._params()
        return self

    def predict(self, X) -> np.ndarray:
        X = check_array(X, ensure_min_features=3)
        if X.shape[1] != 3:
            raise DataError(f"expected 3 columns (rho, alpha, gamma), got {X.shape[1]}")
        params = self._params()
        return np.array([position_score(r, a, g, params) for r, a, g in X])

    def decide(self, X, directions: Sequence) -> list[Decision]:
        params = self._params()
        return [select_action(d, w, params) for d, w in zip(directions, self.predict(X))]
