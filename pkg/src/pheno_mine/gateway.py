"""Completion gateway: HTTP chat backend, deterministic mock, cache, batching.

Every extraction call goes through ``LlmGateway.complete``, which consults a
content-addressed on-disk cache first and retries transient backend failures
with exponential backoff. ``complete_batch`` fans requests out with a bounded
number in flight and reports per-request failures positionally.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

import requests

from .errors import (
    BackendError,
    ConfigError,
    ParameterError,
    ProtocolError,
    TransientBackendError,
    TransportError,
)
from .prompts import category_phrase_of, note_section_of
from .schema import PhenotypeList

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "gemma-3-12b-it"
API_KEY_ENV_VAR = "PHENO_MINE_API_KEY"
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_BASE = 1.0


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_output_tokens: int = 64

    def __post_init__(self):
        if not self.prompt:
            raise ParameterError("prompt must be non-empty")
        if self.temperature < 0:
            raise ParameterError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ParameterError(
                f"max_output_tokens must be >= 1, got {self.max_output_tokens}"
            )


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    backend_id: str
    cached: bool
    latency_ms: float


@dataclass(frozen=True)
class MockRule:
    category: str
    trigger: str  # lowercase substring searched in the note section
    phenotype: str  # emitted display name


@dataclass(frozen=True)
class MockRuleTable:
    rules: tuple[MockRule, ...]

    @classmethod
    def from_csv(cls, path: str | Path) -> "MockRuleTable":
        path = Path(path)
        rules = []
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"category", "trigger", "phenotype"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ConfigError(
                    f"{path}: mock rules file must have columns category,trigger,phenotype"
                )
            for lineno, row in enumerate(reader, start=2):
                trigger = (row["trigger"] or "").strip().lower()
                if not row["category"] or not trigger or not row["phenotype"]:
                    raise ConfigError(f"{path}:{lineno}: empty field in mock rule")
                rules.append(MockRule(row["category"].strip(), trigger, row["phenotype"].strip()))
        return cls(rules=tuple(rules))

    def restricted_to(self, plist: PhenotypeList) -> "MockRuleTable":
        """Drop rules for categories outside the active list.

        Lets one rule file cover a superset vocabulary while extraction runs
        on a narrower list.
        """
        known = {cat.name for cat in plist.categories}
        return MockRuleTable(rules=tuple(r for r in self.rules if r.category in known))

    def validate_against(self, plist: PhenotypeList):
        """Every rule must name a category and display name of the active list."""
        names_by_category: dict[str, set[str]] = {}
        for cat in plist.categories:
            names_by_category.setdefault(cat.name, set()).update(
                p.display_name.lower() for p in cat.candidates
            )
        for rule in self.rules:
            if rule.category not in names_by_category:
                raise ConfigError(
                    f"mock rule names unknown category {rule.category!r}"
                )
            if rule.phenotype.lower() not in names_by_category[rule.category]:
                raise ConfigError(
                    f"mock rule emits {rule.phenotype!r}, which is not a display name "
                    f"in category {rule.category!r}"
                )


class MockBackend:
    """Deterministic rule-based stand-in for the chat model.

    A rule fires when its trigger substring occurs (case-insensitively) in the
    prompt's note section and its category matches the prompt's category
    phrase exactly. Fired display names are emitted comma-separated in rule
    order; no hits emits "none".
    """

    backend_id = "mock"

    def __init__(self, table: MockRuleTable, plist: PhenotypeList):
        table.validate_against(plist)
        self.table = table
        # Map prompt phrase -> category names carrying that phrase. Exact
        # phrase equality keeps look-alike categories ("Memory" vs "Memory
        # Indicators") from cross-firing.
        self._categories_by_phrase: dict[str, list[str]] = {}
        for cat in plist.categories:
            self._categories_by_phrase.setdefault(cat.phrase().lower(), []).append(cat.name)

    def complete_text(self, request: CompletionRequest) -> str:
        phrase = category_phrase_of(request.prompt).lower()
        note = note_section_of(request.prompt).lower()
        active = set(self._categories_by_phrase.get(phrase, []))
        emitted: list[str] = []
        for rule in self.table.rules:
            if rule.category in active and rule.trigger in note:
                if rule.phenotype not in emitted:
                    emitted.append(rule.phenotype)
        return ", ".join(emitted) if emitted else "none"


def mock_complete(
    request: CompletionRequest, table: MockRuleTable, plist: PhenotypeList
) -> CompletionResponse:
    """One-shot mock completion without cache or gateway plumbing."""
    backend = MockBackend(table, plist)
    start = time.perf_counter()
    text = backend.complete_text(request)
    return CompletionResponse(
        text=text,
        backend_id=backend.backend_id,
        cached=False,
        latency_ms=(time.perf_counter() - start) * 1000.0,
    )


class HttpChatBackend:
    """Chat-completions HTTP backend (message list + model + temperature)."""

    backend_id = "http"

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        post=requests.post,
    ):
        if not base_url:
            raise ConfigError("http backend requires a base URL")
        self.base_url = base_url.rstrip("/")
        self.url = f"{self.base_url}/v1/chat/completions"
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV_VAR)
        self.timeout = timeout
        self._post = post

    def preflight(self):
        """Fail fast with a clear message when the endpoint is unreachable."""
        parsed = urlparse(self.base_url)
        host = parsed.hostname
        port = parsed.port or (443 if parsed.scheme == "https" else 80)
        if not host:
            raise ConfigError(f"cannot parse endpoint host from {self.base_url!r}")
        try:
            with socket.create_connection((host, port), timeout=5.0):
                pass
        except OSError as exc:
            raise TransportError(
                f"completion endpoint {self.base_url} is unreachable: {exc}"
            ) from exc

    def complete_text(self, request: CompletionRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._post(self.url, json=payload, headers=headers, timeout=self.timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransientBackendError(f"request to {self.url} failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code} from {self.url}")
        if resp.status_code >= 400:
            raise BackendError(f"HTTP {resp.status_code} from {self.url}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
            if not isinstance(text, str):
                raise TypeError("message content is not a string")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            logger.error("malformed completion body from %s: %r", self.url, resp.text[:500])
            raise ProtocolError(f"cannot parse completion response: {exc}") from exc
        return text


class ResponseCache:
    """Content-addressed directory of completion responses.

    The key hashes (backend_id, model, temperature, prompt); a hit replays the
    stored text byte-identically. Writes go through a temp file + rename so a
    crashed run never leaves a truncated entry.
    """

    def __init__(self, directory: str | Path | None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(backend_id: str, request: CompletionRequest) -> str:
        blob = json.dumps(
            {
                "backend": backend_id,
                "model": request.model,
                "temperature": request.temperature,
                "prompt": request.prompt,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def get(self, key: str) -> str | None:
        if not self.directory:
            return None
        path = self.directory / f"{key}.json"
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            text = doc["text"]
            if not isinstance(text, str):
                raise TypeError
            return text
        except (OSError, ValueError, KeyError, TypeError):
            logger.warning("ignoring corrupt cache entry %s", path)
            return None

    def put(self, key: str, text: str, request: CompletionRequest, backend_id: str):
        if not self.directory:
            return
        path = self.directory / f"{key}.json"
        tmp = path.with_suffix(f".tmp.{os.getpid()}")
        doc = {
            "text": text,
            "backend": backend_id,
            "model": request.model,
            "temperature": request.temperature,
            "prompt_sha256": hashlib.sha256(request.prompt.encode("utf-8")).hexdigest(),
        }
        tmp.write_text(json.dumps(doc, sort_keys=True, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


@dataclass
class BatchResult:
    responses: "list[CompletionResponse | None]"
    failures: "list[tuple[int, str]]"  # (request index, error message)

    @property
    def ok(self) -> bool:
        return not self.failures


class LlmGateway:
    """Backend-agnostic completion entry point with cache and retry policy."""

    def __init__(
        self,
        backend,
        cache_dir: str | Path | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base: float = DEFAULT_BACKOFF_BASE,
        sleep=time.sleep,
    ):
        if max_attempts < 1:
            raise ParameterError(f"max_attempts must be >= 1, got {max_attempts}")
        self.backend = backend
        self.cache = ResponseCache(cache_dir)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self.cache_hits = 0
        self.cache_misses = 0
        self._counter_lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = ResponseCache.key(self.backend.backend_id, request)
        hit = self.cache.get(key)
        if hit is not None:
            with self._counter_lock:
                self.cache_hits += 1
            return CompletionResponse(
                text=hit, backend_id=self.backend.backend_id, cached=True, latency_ms=0.0
            )
        with self._counter_lock:
            self.cache_misses += 1
        start = time.perf_counter()
        text = self._complete_with_retries(request)
        latency_ms = (time.perf_counter() - start) * 1000.0
        self.cache.put(key, text, request, self.backend.backend_id)
        return CompletionResponse(
            text=text, backend_id=self.backend.backend_id, cached=False, latency_ms=latency_ms
        )

    def _complete_with_retries(self, request: CompletionRequest) -> str:
        last_error = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                return self.backend.complete_text(request)
            except TransientBackendError as exc:
                last_error = exc
                if attempt < self.max_attempts:
                    delay = self.backoff_base * (2 ** (attempt - 1))
                    logger.warning(
                        "transient backend failure (attempt %d/%d): %s; retrying in %.1fs",
                        attempt,
                        self.max_attempts,
                        exc,
                        delay,
                    )
                    self._sleep(delay)
        raise TransportError(
            f"backend failed after {self.max_attempts} attempts: {last_error}"
        ) from last_error

    def complete_batch(
        self, requests_seq: "list[CompletionRequest]", max_in_flight: int = 4
    ) -> BatchResult:
        if max_in_flight < 1:
            raise ParameterError(f"max_in_flight must be >= 1, got {max_in_flight}")
        responses: list[CompletionResponse | None] = [None] * len(requests_seq)
        failures: list[tuple[int, str]] = []
        if not requests_seq:
            return BatchResult(responses=responses, failures=failures)
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = {
                pool.submit(self.complete, req): i for i, req in enumerate(requests_seq)
            }
            for future, index in futures.items():
                try:
                    responses[index] = future.result()
                except Exception as exc:  # noqa: BLE001 - reported positionally
                    failures.append((index, str(exc)))
        failures.sort()
        return BatchResult(responses=responses, failures=failures)
