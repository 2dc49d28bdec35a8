"""Parsers for the bracketed agent output grammars.

Every parser is total: given any ``str`` or ``bytes`` it either returns a
value or raises :class:`ParseError`. Surrounding prose is ignored; the
payload of a block runs to its matching closing bracket, so nested
brackets inside a payload survive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from ..errors import ParseError
from ..expertise import Persona
from ..sizing import Direction, RiskLevel


@dataclass(frozen=True)
class RiskAssessment:
    level: RiskLevel
    rationale: str


@dataclass(frozen=True)
class DirectionPrediction:
    direction: Direction
    rationale: str


@dataclass(frozen=True)
class AlignmentVotes:
    votes: Mapping[Persona, bool]

    def __post_init__(self):
        missing = set(Persona) - set(self.votes)
        if missing:
            raise ParseError(f"alignment votes missing {sorted(p.value for p in missing)}")

    def __getitem__(self, persona) -> bool:
        return self.votes[Persona(persona)]


def _as_text(text) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8", errors="replace")
    if not isinstance(text, str):
        raise ParseError(f"expected text, got {type(text).__name__}")
    return text


def _block_end(text: str, open_idx: int) -> int:
    """Index of the bracket closing the one at ``open_idx``."""
    depth = 0
    for i in range(open_idx, len(text)):
        ch = text[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return i
    raise ParseError("unbalanced bracket")


def _tagged_block(tag: str, text: str) -> str:
    """Raw content of the first ``[tag: ...]`` block, after the colon."""
    m = re.search(r"\[\s*" + re.escape(tag) + r"\s*:", text)
    if m is None:
        raise ParseError(f"no [{tag}: ...] block found")
    end = _block_end(text, m.start())
    return text[m.end():end]


def parse_bracket_summary(tag: str, text) -> str:
    payload = _tagged_block(tag, _as_text(text)).strip()
    if not payload:
        raise ParseError(f"[{tag}: ...] block is empty")
    return payload


def format_summary(tag: str, payload: str) -> str:
    return f"[{tag}: {payload}]"


_RISK_RE = re.compile(r"\s*(\S+?)\s*,\s*risk_evaluation\s*:(.*)\Z", re.DOTALL)


def parse_risk(text) -> RiskAssessment:
    body = _tagged_block("risk_level", _as_text(text))
    m = _RISK_RE.match(body)
    if m is None:
        raise ParseError("malformed risk block: expected 'risk_level: L, risk_evaluation: R'")
    token, rationale = m.group(1), m.group(2).strip()
    try:
        level = RiskLevel(token)
    except ValueError:
        raise ParseError(f"unknown risk level {token!r}; expected Low, Medium or High") from None
    if not rationale:
        raise ParseError("risk_evaluation is empty")
    return RiskAssessment(level, rationale)


def format_risk(risk: RiskAssessment) -> str:
    return f"[risk_level: {risk.level.value}, risk_evaluation: {risk.rationale}]"


_DIRECTION_RE = re.compile(r"\s*(\S+?)\s*,\s*rationale\s*:(.*)\Z", re.DOTALL)


def parse_direction(text) -> DirectionPrediction:
    body = _tagged_block("direction", _as_text(text))
    m = _DIRECTION_RE.match(body)
    if m is None:
        raise ParseError("malformed direction block: expected 'direction: up|down, rationale: R'")
    token, rationale = m.group(1), m.group(2).strip()
    if token not in ("up", "down"):
        raise ParseError(f"unknown direction {token!r}; expected up or down")
    if not rationale:
        raise ParseError("rationale is empty")
    return DirectionPrediction(Direction(token), rationale)


def format_direction(pred: DirectionPrediction) -> str:
    return f"[direction: {pred.direction.value}, rationale: {pred.rationale}]"


_VOTE_RE = re.compile(r"\s*([A-Za-z]+)\s*:\s*(\S*)\s*\Z")


def parse_alignment(text) -> AlignmentVotes:
    text = _as_text(text)
    names = "|".join(p.value for p in Persona)
    m = re.search(r"\[\s*(?:" + names + r")\s*:", text)
    if m is None:
        raise ParseError("no alignment block found")
    body = text[m.start() + 1:_block_end(text, m.start())]
    votes: dict[Persona, bool] = {}
    for part in body.split(","):
        vm = _VOTE_RE.match(part)
        if vm is None:
            raise ParseError(f"malformed vote {part.strip()!r}")
        name, token = vm.groups()
        try:
            persona = Persona(name)
        except ValueError:
            raise ParseError(f"unknown persona {name!r}") from None
        if persona in votes:
            raise ParseError(f"duplicate vote for {name}")
        if token not in ("Yes", "No"):
            raise ParseError(f"unknown vote {token!r} for {name}; expected Yes or No")
        votes[persona] = token == "Yes"
    missing = [p.value for p in Persona if p not in votes]
    if missing:
        raise ParseError(f"alignment votes missing {', '.join(missing)}")
    return AlignmentVotes(votes)


def format_alignment(votes: AlignmentVotes) -> str:
    inner = ", ".join(f"{p.value}:{'Yes' if votes[p] else 'No'}" for p in Persona)
    return f"[{inner}]"
