"""Minimal chat-completion client used by judging and instruction generation.

Requests and responses are plain chat-message lists.  The HTTP client posts
{"model": ..., "messages": [...]} and accepts either {"content": "..."} or
an OpenAI-style choices[0].message.content body.  Transient failures are
retried 3 times with exponential backoff (base 2 seconds).  The auth token
is read from the VLPIPE_API_TOKEN environment variable.

Offline runs use ReplayChatClient, which serves responses recorded one per
line in an ndjson file: either a bare JSON string or {"content": "..."}.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import requests

from .errors import ParseError

TOKEN_ENV_VAR = "VLPIPE_API_TOKEN"
MAX_ATTEMPTS = 3
BACKOFF_BASE_SECONDS = 2.0


class ChatClient(Protocol):
    def complete(self, messages: list[dict[str, str]]) -> str: ...


def _extract_content(body: dict) -> str:
    if "content" in body:
        return str(body["content"])
    try:
        return str(body["choices"][0]["message"]["content"])
    except (KeyError, IndexError, TypeError):
        raise ParseError(f"no content in response body: {str(body)[:120]}")


@dataclass
class HttpChatClient:
    endpoint: str
    model: str = "gpt-3.5-turbo"
    timeout: float = 60.0
    post: Callable = requests.post
    sleep: Callable[[float], None] = time.sleep

    def complete(self, messages: list[dict[str, str]]) -> str:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {"model": self.model, "messages": messages}
        last_error: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                self.sleep(BACKOFF_BASE_SECONDS ** attempt)
            try:
                resp = self.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                if resp.status_code >= 500:
                    last_error = RuntimeError(f"server error {resp.status_code}")
                    continue
                resp.raise_for_status()
                return _extract_content(resp.json())
            except requests.RequestException as exc:
                last_error = exc
        raise RuntimeError(
            f"chat request failed after {MAX_ATTEMPTS} attempts: {last_error}"
        )


@dataclass
class ReplayChatClient:
    """Serves pre-recorded responses in order; one response per request."""

    responses: list[str]
    cursor: int = 0

    @classmethod
    def from_file(cls, path) -> "ReplayChatClient":
        responses = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                responses.append(row["content"] if isinstance(row, dict) else str(row))
        return cls(responses=responses)

    def complete(self, messages: list[dict[str, str]]) -> str:
        if self.cursor >= len(self.responses):
            raise RuntimeError(
                f"replay exhausted after {len(self.responses)} responses"
            )
        out = self.responses[self.cursor]
        self.cursor += 1
        return out


@dataclass
class StubChatClient:
    """Test double: a fixed reply or a function of the messages."""

    reply: str | Callable[[list[dict[str, str]]], str] = ""
    calls: list[list[dict[str, str]]] = field(default_factory=list)

    def complete(self, messages: list[dict[str, str]]) -> str:
        self.calls.append(messages)
        return self.reply(messages) if callable(self.reply) else self.reply


def client_from_endpoint(endpoint: str, model: str = "gpt-3.5-turbo") -> ChatClient:
    """file:// endpoints replay recorded responses; anything else is HTTP."""
    if endpoint.startswith("file://"):
        return ReplayChatClient.from_file(endpoint[len("file://"):])
    return HttpChatClient(endpoint=endpoint, model=model)
