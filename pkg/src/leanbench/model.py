"""Tactic-candidate generation backends.

A backend returns raw (text, logprob) completions for a prompt; the shared
`generate_candidates` wrapper strips stop sequences, drops empties, dedupes
by text keeping the best logprob, and sorts by logprob descending. Two
backends ship: a scripted mock keyed on the prompt's proof-state block, and
a completion-style HTTP client with retry/backoff.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

from .checker import normalize_goal

logger = logging.getLogger(__name__)

DEFAULT_STOP_SEQUENCES = ("[/TAC]",)


class BackendUnavailable(Exception):
    """The completion service kept failing after all retries."""


class MalformedFixture(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    text: str
    logprob: float


@dataclass
class GenerationRequest:
    prompt: str
    num_samples: int = 32
    max_new_tokens: int = 256
    temperature: float = 1.0
    stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")


class Backend(Protocol):
    def generate(self, request: GenerationRequest) -> list[tuple[str, float]]: ...


def generate_candidates(backend: Backend, request: GenerationRequest) -> list[Candidate]:
    """Clean, dedupe, and rank a backend's raw completions.

    Returns at most num_samples candidates, text-deduplicated keeping the
    highest logprob per text, sorted by logprob descending.
    """
    best: dict[str, float] = {}
    for text, logprob in backend.generate(request):
        for stop in request.stop_sequences:
            cut = text.find(stop)
            if cut != -1:
                text = text[:cut]
        text = text.strip()
        if not text:
            continue
        if not math.isfinite(logprob):
            continue
        logprob = min(logprob, 0.0)
        if text not in best or logprob > best[text]:
            best[text] = logprob
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [Candidate(text=t, logprob=lp) for t, lp in ranked[: request.num_samples]]


def _extract_state_block(prompt: str) -> str | None:
    start = prompt.rfind("[STATE]\n")
    if start == -1:
        return None
    end = prompt.find("\n[/STATE]", start)
    if end == -1:
        return None
    return prompt[start + len("[STATE]\n") : end]


class MockScriptBackend:
    """Scripted backend: longest fixture key matching the prompt's state.

    Keys are matched against the [STATE]...[/STATE] block (whole prompt when
    absent), after whitespace normalization, so context truncation variants
    hit the same script entry.
    """

    def __init__(self, script: dict[str, list[tuple[str, float]]]):
        self.script = {normalize_goal(k): list(v) for k, v in script.items()}

    @classmethod
    def load(cls, path: str | Path) -> "MockScriptBackend":
        text = Path(path).read_text(encoding="utf-8")

        def reject_duplicates(pairs: list[tuple[str, Any]]) -> dict:
            obj: dict = {}
            for key, value in pairs:
                if key in obj:
                    raise MalformedFixture(f"{path}: duplicate key {key!r}")
                obj[key] = value
            return obj

        try:
            raw = json.loads(text, object_pairs_hook=reject_duplicates)
        except json.JSONDecodeError as exc:
            raise MalformedFixture(f"{path}:{exc.lineno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise MalformedFixture(f"{path}: fixture must be a JSON object")
        script: dict[str, list[tuple[str, float]]] = {}
        for key, rows in raw.items():
            entries: list[tuple[str, float]] = []
            for row in rows:
                if (
                    not isinstance(row, list)
                    or len(row) != 2
                    or not isinstance(row[0], str)
                    or not isinstance(row[1], (int, float))
                ):
                    raise MalformedFixture(
                        f"{path}: entry for {key!r} must be [tacticText, logprob]"
                    )
                text_, lp = row
                if lp > 0 or not math.isfinite(lp):
                    raise MalformedFixture(
                        f"{path}: logprob for {text_!r} must be finite and <= 0"
                    )
                entries.append((text_, float(lp)))
            script[key] = entries
        return cls(script)

    def generate(self, request: GenerationRequest) -> list[tuple[str, float]]:
        block = _extract_state_block(request.prompt)
        haystack = normalize_goal(block if block is not None else request.prompt)
        match: str | None = None
        for key in self.script:
            if key and key in haystack:
                if match is None or len(key) > len(match):
                    match = key
        if match is None:
            return []
        return list(self.script[match])


@dataclass
class HttpBackendConfig:
    endpoint: str
    model: str | None = None
    api_key_env: str | None = None
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 0.5
    temperature: float | None = None  # overrides the per-request temperature


class HttpCompletionBackend:
    """Completion-style HTTP backend with exponential-backoff retries.

    Request body: {prompt, n, max_tokens, temperature, logprobs, stop[, model]}.
    Reply: {choices: [{text, logprob_sum | logprobs.token_logprobs}]}.
    """

    def __init__(self, config: HttpBackendConfig, session: Any = None):
        import requests

        self.config = config
        self._http = session or requests.Session()

    def generate(self, request: GenerationRequest) -> list[tuple[str, float]]:
        import requests

        temperature = (
            self.config.temperature if self.config.temperature is not None else request.temperature
        )
        payload: dict[str, Any] = {
            "prompt": request.prompt,
            "n": request.num_samples,
            "max_tokens": request.max_new_tokens,
            "temperature": temperature,
            "logprobs": True,
            "stop": list(request.stop_sequences),
        }
        if self.config.model:
            payload["model"] = self.config.model
        headers = {}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"

        last_error: Exception | None = None
        for attempt in range(self.config.retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post(
                    self.config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("completion request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code >= 500:
                last_error = BackendUnavailable(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"completion service returned {resp.status_code}")
            body = resp.json()
            return [self._parse_choice(c) for c in body.get("choices", [])]
        raise BackendUnavailable(str(last_error))

    @staticmethod
    def _parse_choice(choice: dict) -> tuple[str, float]:
        text = choice.get("text", "")
        if "logprob_sum" in choice:
            return text, float(choice["logprob_sum"])
        token_lps = (choice.get("logprobs") or {}).get("token_logprobs") or []
        return text, float(sum(lp for lp in token_lps if lp is not None))


def load_mock_script(path: str | Path) -> MockScriptBackend:
    """Load the scripted mock backend from a JSON fixture."""
    return MockScriptBackend.load(path)
