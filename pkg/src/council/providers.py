"""Chat provider abstraction: ordered role/content list in, one completion out."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

DEFAULT_LLM_ENDPOINT = "https://api.openai.com/v1/chat/completions"
LLM_API_KEY_ENV = "COUNCIL_LLM_API_KEY"
LLM_ENDPOINT_ENV = "COUNCIL_LLM_ENDPOINT"


class ProviderError(Exception):
    """Transport-level failure talking to the completion provider."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str


@dataclass
class ChatProviderRequest:
    messages: list[ChatMessage] = field(default_factory=list)
    model_hint: str = "gpt-4"
    max_retries_remaining: int = 2


class ChatProvider(Protocol):
    def complete(self, request: ChatProviderRequest) -> str: ...


class ScriptedProvider:
    """Replays canned completions by request ordinal.

    The fixture file is JSON: either a list of completion strings or an
    object mapping stringified ordinals to completions. Requests past the
    end of the script raise ProviderError.
    """

    def __init__(self, completions: list[str]):
        self._completions = list(completions)
        self.requests_seen: list[ChatProviderRequest] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(doc, dict) and "completions" in doc:
            doc = doc["completions"]
        if isinstance(doc, dict):
            ordered = [doc[key] for key in sorted(doc, key=int)]
        elif isinstance(doc, list):
            ordered = list(doc)
        else:
            raise ValueError(f"unrecognized provider fixture shape in {path}")
        return cls(ordered)

    def complete(self, request: ChatProviderRequest) -> str:
        ordinal = len(self.requests_seen)
        self.requests_seen.append(request)
        if ordinal >= len(self._completions):
            raise ProviderError(f"scripted provider exhausted at request {ordinal}")
        return self._completions[ordinal]


class OpenAIChatProvider:
    """Minimal client for any OpenAI-compatible chat completions endpoint."""

    def __init__(self, api_key: str | None = None, endpoint: str | None = None, timeout: float = 60.0):
        self.api_key = api_key or os.environ.get(LLM_API_KEY_ENV)
        self.endpoint = endpoint or os.environ.get(LLM_ENDPOINT_ENV, DEFAULT_LLM_ENDPOINT)
        self.timeout = timeout
        if not self.api_key:
            raise ProviderError(f"live provider needs {LLM_API_KEY_ENV} set")

    def complete(self, request: ChatProviderRequest) -> str:
        import requests

        payload = {
            "model": request.model_hint,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        }
        try:
            response = requests.post(
                self.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except Exception as exc:
            raise ProviderError(f"chat completion failed: {exc}") from exc
