"""Expert case memory with cosine retrieval and hit-rate reliability.

Cases are (query, knowledge) pairs attributed to one investor persona. The
query text is embedded once; at decision time the current market summary is
embedded and the most similar case is retrieved. Each activated case keeps
a success/activation tally which, Laplace-smoothed, is the reliability
score fed to position sizing.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .errors import BackendError, ConfigError, DataError

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\w+")


class Persona(str, Enum):
    BUFFETT = "Buffett"
    SOROS = "Soros"
    LYNCH = "Lynch"
    GRAHAM = "Graham"


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def normalize(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DataError("embedding contains non-finite entries")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DataError("cannot normalize a zero embedding")
    return v / norm


def token_bucket(token: str, dim: int) -> int:
    """Platform-independent bucket index for a lowercase token."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


class HashingEmbedder:
    """Deterministic bag-of-words embedder: hashed token counts, L2-normalized."""

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ConfigError("embedding dimension must be positive")
        self.dim = dim

    def tokens(self, text: str) -> list[str]:
        lowered = text.lower()
        return _TOKEN_RE.findall(lowered) or lowered.split()

    def embed(self, text: str) -> np.ndarray:
        if not isinstance(text, str) or not text.strip():
            raise DataError("cannot embed empty text")
        counts = np.zeros(self.dim)
        for tok in self.tokens(text):
            counts[token_bucket(tok, self.dim)] += 1.0
        return normalize(counts)


class RemoteEmbedder:
    """OpenAI-compatible ``/embeddings`` endpoint. Dimension is learned from the first response."""

    def __init__(self, base_url: str, model: str, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.dim = None
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, text: str) -> np.ndarray:
        if not isinstance(text, str) or not text.strip():
            raise DataError("cannot embed empty text")
        key = os.environ.get(self.api_key_env)
        if not key:
            raise BackendError(f"environment variable {self.api_key_env} is not set")
        try:
            resp = self._client.post(
                f"{self.base_url}/embeddings",
                headers={"Authorization": f"Bearer {key}"},
                json={"model": self.model, "input": text},
            )
            resp.raise_for_status()
            values = resp.json()["data"][0]["embedding"]
        except Exception as exc:
            raise BackendError(f"embedding request failed: {exc}") from exc
        vec = normalize(values)
        if self.dim is None:
            self.dim = len(vec)
        elif len(vec) != self.dim:
            raise BackendError(f"embedding dimension changed from {self.dim} to {len(vec)}")
        return vec


@dataclass(frozen=True)
class ExpertCase:
    id: str
    persona: Persona
    query_text: str
    knowledge_text: str
    embedding: np.ndarray
    activations: int = 0
    successes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "persona", Persona(self.persona))
        if not self.id:
            raise DataError("expert case id must be non-empty")
        if self.activations < 0 or self.successes < 0:
            raise DataError(f"case {self.id}: counters must be non-negative")
        if self.successes > self.activations:
            raise DataError(f"case {self.id}: successes exceed activations")

    def __eq__(self, other):
        if not isinstance(other, ExpertCase):
            return NotImplemented
        return (
            (self.id, self.persona, self.query_text, self.knowledge_text, self.activations, self.successes)
            == (other.id, other.persona, other.query_text, other.knowledge_text, other.activations, other.successes)
            and np.array_equal(self.embedding, other.embedding)
        )

    __hash__ = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "persona": self.persona.value,
            "query": self.query_text,
            "knowledge": self.knowledge_text,
            "activations": self.activations,
            "successes": self.successes,
        }


@dataclass(frozen=True)
class RetrievalResult:
    case: ExpertCase
    similarity: float


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


TIE_TOL = 1e-12


def retrieve(query: np.ndarray, store: Iterable[ExpertCase]) -> RetrievalResult:
    """Most cosine-similar case; ties go to the lexicographically smallest id."""
    cases = sorted(store, key=lambda c: c.id)
    if not cases:
        raise DataError("cannot retrieve from an empty expert store")
    q = normalize(query)
    mat = np.stack([normalize(c.embedding) for c in cases])
    sims = np.clip(mat @ q, -1.0, 1.0)
    # BLAS rounding can split exact duplicates by an ulp, so ties are tolerance based
    best = int(np.flatnonzero(sims >= sims.max() - TIE_TOL)[0])
    return RetrievalResult(cases[best], float(sims[best]))


def activation_gate(result: RetrievalResult, tau_sim: float) -> bool:
    if not -1.0 <= tau_sim <= 1.0:
        raise ConfigError(f"tau_sim must lie in [-1, 1], got {tau_sim}")
    return result.similarity >= tau_sim


def reliability(case: ExpertCase) -> float:
    return (case.successes + 1) / (case.activations + 2)


def record_outcome(case: ExpertCase, hit: bool) -> ExpertCase:
    return replace(case, activations=case.activations + 1, successes=case.successes + int(bool(hit)))


REFINE_TEMPLATE = """[Expert Knowledge Refinement]

The following expert knowledge entry ({persona}) was activated for the query below and the resulting prediction failed.

Query: {query}
Current knowledge: {knowledge}
Feedback from the failed prediction: {feedback}

Return only the revised or augmented knowledge text, with no additional commentary."""


def refine_case(case: ExpertCase, feedback: str, backend, embedder: Embedder) -> ExpertCase:
    """Rewrite a case's knowledge from failure feedback.

    On backend failure the case is returned unchanged and a warning is logged.
    """
    if not feedback or not feedback.strip():
        raise DataError("refinement feedback must be non-empty")
    prompt = REFINE_TEMPLATE.format(
        persona=case.persona.value, query=case.query_text,
        knowledge=case.knowledge_text, feedback=feedback,
    )
    try:
        revised = backend.complete(prompt, stage="expert_refinement")
    except BackendError as exc:
        log.warning("refinement of case %s failed: %s", case.id, exc)
        return case
    if not revised or not revised.strip():
        log.warning("refinement of case %s returned empty text; keeping original", case.id)
        return case
    return replace(case, knowledge_text=revised.strip(), embedding=embedder.embed(case.query_text))


class ExpertStore:
    """In-memory case collection. Reads are lock-free; writes go through one lock."""

    def __init__(self, cases: Iterable[ExpertCase] = (), embedder: Embedder | None = None):
        self.embedder = embedder or HashingEmbedder()
        self._cases: dict[str, ExpertCase] = {}
        self._lock = threading.Lock()
        for c in cases:
            if c.id in self._cases:
                raise DataError(f"duplicate expert case id {c.id!r}")
            self._cases[c.id] = c

    def __len__(self):
        return len(self._cases)

    def __iter__(self):
        return iter(list(self._cases.values()))

    def __getitem__(self, case_id: str) -> ExpertCase:
        return self._cases[case_id]

    @property
    def cases(self) -> list[ExpertCase]:
        return sorted(self._cases.values(), key=lambda c: c.id)

    def add(self, case_id: str, persona, query: str, knowledge: str,
            activations: int = 0, successes: int = 0) -> ExpertCase:
        case = ExpertCase(case_id, Persona(persona), query, knowledge,
                          self.embedder.embed(query), activations, successes)
        with self._lock:
            if case_id in self._cases:
                raise DataError(f"duplicate expert case id {case_id!r}")
            self._cases[case_id] = case
        return case

    def retrieve(self, text: str) -> RetrievalResult:
        return retrieve(self.embedder.embed(text), self._cases.values())

    def record_outcome(self, case_id: str, hit: bool) -> ExpertCase:
        with self._lock:
            updated = record_outcome(self._cases[case_id], hit)
            self._cases[case_id] = updated
        return updated

    def refine(self, case_id: str, feedback: str, backend) -> ExpertCase:
        with self._lock:
            updated = refine_case(self._cases[case_id], feedback, backend, self.embedder)
            self._cases[case_id] = updated
        return updated

    def copy(self) -> "ExpertStore":
        return ExpertStore(self.cases, self.embedder)

    @classmethod
    def from_records(cls, records: Iterable[dict], embedder: Embedder | None = None) -> "ExpertStore":
        store = cls(embedder=embedder)
        for i, rec in enumerate(records, start=1):
            missing = [k for k in ("id", "persona", "query", "knowledge") if k not in rec]
            if missing:
                raise DataError(f"record {i}: missing field(s) {', '.join(missing)}")
            unknown = set(rec) - {"id", "persona", "query", "knowledge", "activations", "successes"}
            if unknown:
                raise DataError(f"record {i}: unknown field(s) {', '.join(sorted(unknown))}")
            try:
                persona = Persona(rec["persona"])
            except ValueError:
                raise DataError(f"record {i}: unknown persona {rec['persona']!r}") from None
            store.add(str(rec["id"]), persona, rec["query"], rec["knowledge"],
                      int(rec.get("activations", 0)), int(rec.get("successes", 0)))
        return store

    @classmethod
    def load(cls, path: str | Path, embedder: Embedder | None = None) -> "ExpertStore":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"expert case file not found: {path}")
        records = []
        with path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
        return cls.from_records(records, embedder)

    @classmethod
    def sample(cls, embedder: Embedder | None = None) -> "ExpertStore":
        """The bundled hand-written corpus (a few cases per persona)."""
        text = resources.files("expertrade").joinpath("data/expert_cases.jsonl").read_text()
        return cls.from_records((json.loads(l) for l in text.splitlines() if l.strip()), embedder)

    def save(self, path: str | Path) -> None:
        with Path(path).open("w") as fh:
            for c in self.cases:
                fh.write(json.dumps(c.to_record(), sort_keys=True) + "\n")


def similarity_to_gamma(similarity: float) -> float:
    """Event similarity used in sizing: negative cosines count as zero relevance."""
    if math.isnan(similarity):
        return 0.0
    return min(max(similarity, 0.0), 1.0)
