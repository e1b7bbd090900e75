"""Label oracles: ground truth, chat-endpoint LLM, caching, and metering.

The LLM oracle renders a fixed three-slot prompt (task expertise, task
kind, labeling instruction with the label codes), POSTs it to a
chat-completion endpoint at temperature 0, and parses the reply into a
class index.  A usage meter tracks tokens, requests, wall time, and the
resulting monetary cost; a caching wrapper memoizes by exact prompt bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Protocol

import requests

from .corpus import Instance

__all__ = [
    "OracleError",
    "LabelingFailedError",
    "PromptTemplate",
    "LabelResult",
    "Prices",
    "UsageMeter",
    "render_prompt",
    "build_request_body",
    "parse_label",
    "Oracle",
    "GroundTruthOracle",
    "ChatCompletionOracle",
    "CachedOracle",
    "ScriptedSession",
]

API_KEY_ENV = "AL_LLM_API_KEY"

_BARE_INT = re.compile(r"[+-]?\d+\Z")
_FIRST_INT = re.compile(r"\d+")


class OracleError(ValueError):
    """Invalid oracle configuration or request."""


class LabelingFailedError(RuntimeError):
    """All labeling attempts for one query failed; carries the raw responses."""

    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class PromptTemplate:
    """The three prompt slots: expertise area, task kind, labeling instruction."""

    expertise: str
    task: str
    instruction: str

    def __post_init__(self) -> None:
        for name in ("expertise", "task", "instruction"):
            if not getattr(self, name).strip():
                raise OracleError(f"prompt slot {name!r} must not be empty")

    def validate_label_codes(self, label_count: int) -> None:
        """The instruction must mention every label code 0..C-1."""
        for code in range(label_count):
            if str(code) not in self.instruction:
                raise OracleError(
                    f"prompt instruction does not mention label code {code}"
                )

    def key_bytes(self) -> bytes:
        return json.dumps(
            [self.expertise, self.task, self.instruction], ensure_ascii=False
        ).encode("utf-8")


@dataclass(frozen=True)
class LabelResult:
    label: int
    raw_text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    source: str  # ground_truth | llm | cache


@dataclass(frozen=True)
class Prices:
    usd_per_1k_prompt_tokens: float
    usd_per_1k_completion_tokens: float

    def cost(self, prompt_tokens: int, completion_tokens: int) -> float:
        return prompt_tokens * (self.usd_per_1k_prompt_tokens / 1000.0) + (
            completion_tokens * (self.usd_per_1k_completion_tokens / 1000.0)
        )


ZERO_PRICES = Prices(0.0, 0.0)


class UsageMeter:
    """Thread-safe monotone counters for oracle usage."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self.requests = 0
        self.wall_seconds = 0.0

    def add(self, prompt_tokens: int, completion_tokens: int, wall_seconds: float) -> None:
        if prompt_tokens < 0 or completion_tokens < 0 or wall_seconds < 0:
            raise OracleError("usage increments must be non-negative")
        with self._lock:
            self.prompt_tokens += prompt_tokens
            self.completion_tokens += completion_tokens
            self.requests += 1
            self.wall_seconds += wall_seconds

    def cost_usd(self, prices: Prices) -> float:
        return prices.cost(self.prompt_tokens, self.completion_tokens)

    def snapshot(self, prices: Prices = ZERO_PRICES) -> dict:
        with self._lock:
            return {
                "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens,
                "requests": self.requests,
                "wall_seconds": self.wall_seconds,
                "cost_usd": prices.cost(self.prompt_tokens, self.completion_tokens),
            }


def render_prompt(template: PromptTemplate, query: str) -> list[dict[str, str]]:
    """Render the two chat messages, byte-exact including the quoted query."""
    if not query:
        raise OracleError("query must not be empty")
    return [
        {"role": "system", "content": f"You are an expert in {template.expertise}."},
        {
            "role": "user",
            "content": (
                f"Now you have a {template.task}. Please {template.instruction}:"
                f"'{query}'. Please only return the label."
            ),
        },
    ]


def build_request_body(model_name: str, template: PromptTemplate, query: str) -> bytes:
    """Serialize the chat request; this exact byte sequence goes on the wire."""
    payload = {
        "model": model_name,
        "messages": render_prompt(template, query),
        "temperature": 0,
    }
    return json.dumps(payload, ensure_ascii=False).encode("utf-8")


def parse_label(content: str, label_count: int) -> Optional[int]:
    """Map a model reply to a class index, or None when unparseable.

    Rule: strip whitespace; a bare integer in [0, C) is accepted; otherwise
    the first run of decimal digits is accepted if in [0, C); otherwise the
    reply is rejected.
    """
    stripped = content.strip()
    if _BARE_INT.match(stripped):
        value = int(stripped)
        if 0 <= value < label_count:
            return value
    found = _FIRST_INT.search(stripped)
    if found:
        value = int(found.group())
        if 0 <= value < label_count:
            return value
    return None


class Oracle(Protocol):
    def label(self, instance: Instance) -> LabelResult: ...


class GroundTruthOracle:
    """Returns the instance's gold label at zero token cost.

    The usage meter is deliberately untouched: simulated human labels have
    no API footprint.
    """

    def label(self, instance: Instance) -> LabelResult:
        if instance.gold_label is None:
            raise OracleError(f"instance {instance.id} has no gold label")
        return LabelResult(
            label=instance.gold_label,
            raw_text="",
            prompt_tokens=0,
            completion_tokens=0,
            latency=0.0,
            source="ground_truth",
        )


class _RateLimiter:
    """Minimum inter-request interval plus a bound on in-flight requests."""

    def __init__(self, min_interval: float, max_in_flight: int):
        self.min_interval = min_interval
        self._gate = threading.Lock()
        self._last = 0.0
        self._slots = threading.Semaphore(max(1, max_in_flight))

    def __enter__(self):
        self._slots.acquire()
        if self.min_interval > 0:
            with self._gate:
                wait = self._last + self.min_interval - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
                self._last = time.monotonic()
        return self

    def __exit__(self, *exc):
        self._slots.release()
        return False


class ChatCompletionOracle:
    """Labels queries through a chat-completion endpoint.

    Retries transport failures and unparseable replies up to ``retry_limit``
    times; exhausting retries raises :class:`LabelingFailedError` with the
    raw responses so the loop can substitute another candidate.  Token
    counts come from the response usage block, falling back to
    ceil(chars/4) when the endpoint omits it.
    """

    def __init__(
        self,
        endpoint: str,
        model_name: str,
        template: PromptTemplate,
        label_count: int,
        *,
        meter: UsageMeter | None = None,
        retry_limit: int = 3,
        backoff: float = 0.25,
        min_interval: float = 0.0,
        max_in_flight: int = 4,
        timeout: float = 120.0,
        session: Optional["SessionLike"] = None,
    ):
        if retry_limit < 0:
            raise OracleError("retry_limit must be >= 0")
        if label_count < 2:
            raise OracleError("label_count must be >= 2")
        template.validate_label_codes(label_count)
        self.endpoint = endpoint
        self.model_name = model_name
        self.template = template
        self.label_count = label_count
        self.meter = meter if meter is not None else UsageMeter()
        self.retry_limit = retry_limit
        self.backoff = backoff
        self.timeout = timeout
        self._limiter = _RateLimiter(min_interval, max_in_flight)
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def label(self, instance: Instance) -> LabelResult:
        return self.label_text(instance.text)

    def label_text(self, query: str) -> LabelResult:
        body = build_request_body(self.model_name, self.template, query)
        prompt_chars = sum(len(m["content"]) for m in render_prompt(self.template, query))
        attempts: list[str] = []
        for attempt in range(self.retry_limit + 1):
            start = time.monotonic()
            try:
                with self._limiter:
                    resp = self._session.post(
                        self.endpoint, data=body, headers=self._headers(),
                        timeout=self.timeout,
                    )
                if resp.status_code != 200:
                    raise requests.RequestException(f"status {resp.status_code}")
                payload = resp.json()
                content = payload["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                attempts.append(f"transport error: {exc}")
                if attempt < self.retry_limit and self.backoff > 0:
                    time.sleep(self.backoff * (2**attempt))
                continue
            elapsed = time.monotonic() - start
            usage = payload.get("usage") or {}
            prompt_tokens = int(usage.get("prompt_tokens", math.ceil(prompt_chars / 4)))
            completion_tokens = int(
                usage.get("completion_tokens", math.ceil(len(content) / 4))
            )
            self.meter.add(prompt_tokens, completion_tokens, elapsed)
            label = parse_label(content, self.label_count)
            if label is None:
                attempts.append(content)
                continue
            return LabelResult(
                label=label,
                raw_text=content,
                prompt_tokens=prompt_tokens,
                completion_tokens=completion_tokens,
                latency=elapsed,
                source="llm",
            )
        raise LabelingFailedError(
            f"no usable label after {self.retry_limit + 1} attempts", attempts
        )


class CachedOracle:
    """Memoizes an inner oracle by (template bytes, query bytes).

    Hits return the stored result with source="cache" and leave the meter
    untouched; failures are never cached.  With ``path`` set, entries are
    appended to a JSONL file and reloaded on construction.
    """

    def __init__(self, inner, *, path: str | Path | None = None):
        self.inner = inner
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._store: dict[str, LabelResult] = {}
        self._template: PromptTemplate | None = getattr(inner, "template", None)
        if self.path is not None and self.path.exists():
            self._load()

    def _key(self, query: str) -> str:
        tpl = self._template.key_bytes() if self._template else b""
        return hashlib.sha256(tpl + b"\x00" + query.encode("utf-8")).hexdigest()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                self._store[row["key_hash"]] = LabelResult(
                    label=int(row["label"]),
                    raw_text=row["raw_text"],
                    prompt_tokens=int(row["tokens"]["prompt"]),
                    completion_tokens=int(row["tokens"]["completion"]),
                    latency=0.0,
                    source="cache",
                )

    def label(self, instance: Instance) -> LabelResult:
        return self.label_text(instance.text, instance=instance)

    def label_text(self, query: str, instance: Instance | None = None) -> LabelResult:
        key = self._key(query)
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return replace(hit, source="cache")
        if instance is not None:
            result = self.inner.label(instance)
        else:
            result = self.inner.label_text(query)
        with self._lock:
            self._store[key] = result
            if self.path is not None:
                row = {
                    "key_hash": key,
                    "template": (
                        [self._template.expertise, self._template.task, self._template.instruction]
                        if self._template
                        else None
                    ),
                    "query": query,
                    "label": result.label,
                    "raw_text": result.raw_text,
                    "tokens": {
                        "prompt": result.prompt_tokens,
                        "completion": result.completion_tokens,
                    },
                }
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return result


class SessionLike(Protocol):
    def post(self, url: str, *, data: bytes, headers: dict, timeout: float): ...


class ScriptedSession:
    """In-process stand-in for requests.Session, driven by a response script.

    Shares the script format with the mock HTTP server; useful for offline
    runs (oracle kind "mock") and fast tests.
    """

    def __init__(self, script):
        from .mock_server import ScriptBook  # local import to avoid a cycle

        self.book = script if hasattr(script, "resolve") else ScriptBook(script)

    def post(self, url: str, *, data: bytes, headers: dict, timeout: float):
        status, payload = self.book.respond(data)
        return _CannedResponse(status, payload)


class _CannedResponse:
    def __init__(self, status_code: int, payload: dict):
        self.status_code = status_code
        self._payload = payload

    def json(self) -> dict:
        return self._payload
