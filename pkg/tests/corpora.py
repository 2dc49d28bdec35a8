"""Random payload and fuzz generators shared by the parser tests."""

import numpy as np

from expertrade.agents import format_alignment, format_summary
from expertrade.agents.parsing import AlignmentVotes
from expertrade.expertise import Persona

WORDS = ["rates", "oil", "guidance", "beat", "miss", "supply", "China", "EV", "gold", "yield",
         "dividend", "Fed", "inflation", "ratio", "P/E", "100%", "-3.2", "Q4", "é", "北京", "{x}"]
PUNCT = [",", ";", ":", ".", "!", "?", "'", '"', "(", ")", "-"]
FUZZ_ALPHABET = list("[]:,{} \n\tYesNoLowHighupdown_") + ["risk_level", "risk_evaluation", "Past_summary",
                                                           "Buffett", "Soros", "direction", "\x00", "�"]


def payload(rng: np.random.Generator, nested: bool = True) -> str:
    """Non-empty text with balanced (possibly nested) square brackets."""
    parts = []
    for _ in range(rng.integers(1, 12)):
        r = rng.random()
        if nested and r < 0.1:
            parts.append("[" + payload(rng, nested=rng.random() < 0.3) + "]")
        elif r < 0.25:
            parts.append(str(rng.choice(PUNCT)))
        else:
            parts.append(str(rng.choice(WORDS)))
    return " ".join(parts)


def votes(rng: np.random.Generator) -> AlignmentVotes:
    return AlignmentVotes({p: bool(rng.integers(2)) for p in Persona})


def wrap(rng: np.random.Generator, block: str) -> str:
    """Surround a block with prose that contains no brackets."""
    pre = " ".join(rng.choice(WORDS[:12], size=rng.integers(0, 4)))
    post = " ".join(rng.choice(WORDS[:12], size=rng.integers(0, 4)))
    return f"{pre}\n{block}\n{post}" if rng.random() < 0.5 else block


def fuzz_text(rng: np.random.Generator):
    """Arbitrary text or bytes biased toward near-miss grammar fragments."""
    kind = rng.integers(4)
    if kind == 0:
        return rng.bytes(int(rng.integers(0, 64)))
    if kind == 1:
        return "".join(chr(int(c)) for c in rng.integers(0, 0x2FFF, size=rng.integers(0, 40)))
    if kind == 2:
        return "".join(str(rng.choice(FUZZ_ALPHABET)) for _ in range(rng.integers(0, 30)))
    # a valid block with one random mutation
    block = format_summary("Past_summary", payload(rng)) if rng.random() < 0.5 else format_alignment(votes(rng))
    i = int(rng.integers(0, len(block)))
    op = rng.integers(3)
    if op == 0:
        return block[:i] + block[i + 1:]
    if op == 1:
        return block[:i] + str(rng.choice(FUZZ_ALPHABET)) + block[i:]
    return block[:i]
