"""Text-completion backends.

``ScriptedBackend`` replays fixed responses and is what tests and offline
runs use; ``RemoteBackend`` talks to an OpenAI-compatible chat-completions
endpoint. Both are safe to call from several threads.
"""

from __future__ import annotations

import json
import os
import threading
from collections import Counter
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from ..errors import BackendError, ConfigError, ScriptExhaustedError


class CompletionBackend(Protocol):
    def complete(self, prompt: str, stage: str) -> str: ...


class ScriptedBackend:
    """Deterministic backend.

    ``script`` may be
      * a list of responses, consumed in call order regardless of stage;
      * a mapping ``stage -> response`` where a string is returned on every
        call for that stage and a list is consumed in order;
      * a callable ``(prompt, stage) -> str``.

    Running past the end of a list raises :class:`ScriptExhaustedError`.
    """

    def __init__(self, script):
        if isinstance(script, (str, bytes)) or not (
            callable(script) or isinstance(script, (Sequence, Mapping))
        ):
            raise ConfigError("script must be a list, a stage mapping or a callable")
        self._lock = threading.Lock()
        self.calls: Counter[str] = Counter()
        self.history: list[tuple[str, str]] = []
        if callable(script):
            self._fn = script
        elif isinstance(script, Mapping):
            self._table = {
                stage: (resp if isinstance(resp, str) else list(resp)) for stage, resp in script.items()
            }
            self._cursors = Counter()
            self._fn = self._from_table
        else:
            self._queue = list(script)
            self._pos = 0
            self._fn = self._from_queue

    def _from_queue(self, prompt: str, stage: str) -> str:
        if self._pos >= len(self._queue):
            raise ScriptExhaustedError(f"script exhausted after {self._pos} responses (stage {stage})")
        resp = self._queue[self._pos]
        self._pos += 1
        return resp

    def _from_table(self, prompt: str, stage: str) -> str:
        if stage not in self._table:
            raise ScriptExhaustedError(f"no scripted response for stage {stage!r}")
        entry = self._table[stage]
        if isinstance(entry, str):
            return entry
        i = self._cursors[stage]
        if i >= len(entry):
            raise ScriptExhaustedError(f"script for stage {stage!r} exhausted after {i} responses")
        self._cursors[stage] += 1
        return entry[i]

    def complete(self, prompt: str, stage: str) -> str:
        with self._lock:
            self.calls[stage] += 1
            self.history.append((stage, prompt))
            resp = self._fn(prompt, stage)
        if not isinstance(resp, str):
            raise BackendError(f"scripted response for {stage!r} is not a string")
        return resp

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"script file not found: {path}")
        try:
            script = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        if isinstance(script, list):
            if not all(isinstance(s, str) for s in script):
                raise ConfigError(f"{path}: every scripted response must be a string")
        elif isinstance(script, dict):
            for stage, resp in script.items():
                ok = isinstance(resp, str) or (isinstance(resp, list) and all(isinstance(s, str) for s in resp))
                if not ok:
                    raise ConfigError(f"{path}: stage {stage!r} must map to a string or list of strings")
        else:
            raise ConfigError(f"{path}: script must be a JSON list or object")
        return cls(script)


class RemoteBackend:
    """Chat-completions client with temperature 0 and a single choice."""

    def __init__(self, base_url: str, model: str, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.calls: Counter[str] = Counter()
        self._lock = threading.Lock()
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, prompt: str, stage: str) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise BackendError(f"environment variable {self.api_key_env} is not set")
        with self._lock:
            self.calls[stage] += 1
        try:
            resp = self._client.post(
                f"{self.base_url}/chat/completions",
                headers={"Authorization": f"Bearer {key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": 0,
                    "n": 1,
                },
                timeout=self.timeout,
            )
            resp.raise_for_status()
            content = resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:
            raise BackendError(f"completion request failed ({stage}): {exc}") from exc
        if not isinstance(content, str):
            raise BackendError(f"completion for {stage} has no text content")
        return content


def callable_backend(fn: Callable[[str, str], str]) -> ScriptedBackend:
    return ScriptedBackend(fn)
