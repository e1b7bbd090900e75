"""Scripted chat-completion endpoint for tests and offline demos.

A script maps requests to canned responses three ways, consulted in order:
by request hash (sha256 hex of the last user message's content), by
sequence number (entries consumed one per request), then a default entry.
Each entry may set content, token usage, an HTTP status, and an injected
latency in milliseconds.  Unmatched requests get a 500 and are logged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

__all__ = ["ScriptBook", "request_hash", "make_server", "gold_label_script"]

log = logging.getLogger(__name__)


def request_hash(user_content: str) -> str:
    return hashlib.sha256(user_content.encode("utf-8")).hexdigest()


def _last_user_content(body: dict) -> str:
    contents = [m.get("content", "") for m in body.get("messages", []) if m.get("role") == "user"]
    return contents[-1] if contents else ""


class ScriptBook:
    """Resolves request bodies to scripted responses; thread-safe."""

    def __init__(self, script: dict | str | Path):
        if not isinstance(script, dict):
            script = json.loads(Path(script).read_text(encoding="utf-8"))
        known = {"by_hash", "sequence", "default"}
        unknown = set(script) - known
        if unknown:
            raise ValueError(f"unknown script keys: {sorted(unknown)}")
        self.by_hash: dict[str, dict] = dict(script.get("by_hash", {}))
        self.sequence: list[dict] = list(script.get("sequence", []))
        self.default: dict | None = script.get("default")
        self.received: list[bytes] = []  # raw request bodies, for assertions
        self._lock = threading.Lock()
        self._cursor = 0

    def resolve(self, body: dict) -> dict | None:
        entry = self.by_hash.get(request_hash(_last_user_content(body)))
        if entry is not None:
            return entry
        with self._lock:
            if self._cursor < len(self.sequence):
                entry = self.sequence[self._cursor]
                self._cursor += 1
                return entry
        return self.default

    def respond(self, raw_body: bytes) -> tuple[int, dict]:
        """Full request->response step: record, resolve, simulate, shape."""
        with self._lock:
            self.received.append(raw_body)
        try:
            body = json.loads(raw_body)
        except json.JSONDecodeError:
            return 400, {"error": {"message": "invalid JSON body"}}
        entry = self.resolve(body)
        if entry is None:
            log.error("unmatched mock request: %s", raw_body[:200])
            return 500, {"error": {"message": "no scripted response for request"}}
        latency_ms = entry.get("latency_ms", 0)
        if latency_ms:
            time.sleep(latency_ms / 1000.0)
        status = int(entry.get("status", 200))
        if status != 200:
            return status, {"error": {"message": f"scripted status {status}"}}
        payload: dict[str, Any] = {
            "choices": [
                {"message": {"role": "assistant", "content": entry.get("content", "")}}
            ]
        }
        if "prompt_tokens" in entry or "completion_tokens" in entry:
            payload["usage"] = {
                "prompt_tokens": int(entry.get("prompt_tokens", 0)),
                "completion_tokens": int(entry.get("completion_tokens", 0)),
            }
        return status, payload


def gold_label_script(
    corpus, template, *, prompt_tokens: int = 0, completion_tokens: int = 1
) -> dict:
    """Script that answers every instance's rendered prompt with its gold label."""
    from .oracle import render_prompt

    by_hash = {}
    for inst in corpus.instances:
        if inst.gold_label is None:
            raise ValueError(f"instance {inst.id} has no gold label")
        user = render_prompt(template, inst.text)[1]["content"]
        by_hash[request_hash(user)] = {
            "content": str(inst.gold_label),
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
        }
    return {"by_hash": by_hash}


class _Handler(BaseHTTPRequestHandler):
    book: ScriptBook  # set by make_server

    def do_POST(self) -> None:  # noqa: N802 (http.server naming)
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        status, payload = self.book.respond(raw)
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt: str, *args) -> None:
        log.debug("mock-llm: " + fmt, *args)


def make_server(script: dict | str | Path, host: str = "127.0.0.1", port: int = 0):
    """Build (but do not start) a threading HTTP server bound to host:port.

    Returns (server, book); the bound port is ``server.server_address[1]``.
    Run with ``server.serve_forever()`` (the CLI does) or via a daemon
    thread in tests.
    """
    book = ScriptBook(script)
    handler = type("BoundHandler", (_Handler,), {"book": book})
    server = ThreadingHTTPServer((host, port), handler)
    return server, book
