"""Session state: message log, agent registry, index, preferences, events.

All mutation happens on the session's single turn sequence (enforced by the
engine); everything here is plain state plus id/clock bookkeeping.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

from .agents import AgentRegistry
from .annotation import ParsedUtterance, SpanKind
from .index import HistoryIndex, PreferenceSpace


class LiveClock:
    kind = "wall"

    def now(self) -> float:
        return time.time()


class LogicalClock:
    """Deterministic tick counter, used by replay and tests."""

    kind = "logical"

    def __init__(self, start: int = 0):
        self._tick = start

    def now(self) -> int:
        tick = self._tick
        self._tick += 1
        return tick


def make_clock(kind: str, start: int = 0):
    if kind == "logical":
        return LogicalClock(start)
    return LiveClock()


@dataclass
class SessionConfig:
    model: str = "gpt-4"
    max_retries: int = 2
    grounding_budget: int = 4000
    domain_hint: str | None = None
    clock: str = "wall"

    def to_doc(self) -> dict:
        return {
            "model": self.model,
            "max_retries": self.max_retries,
            "grounding_budget": self.grounding_budget,
            "domain_hint": self.domain_hint,
            "clock": self.clock,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SessionConfig":
        return cls(
            model=doc["model"],
            max_retries=doc["max_retries"],
            grounding_budget=doc["grounding_budget"],
            domain_hint=doc.get("domain_hint"),
            clock=doc.get("clock", "wall"),
        )


@dataclass
class SpanRecord:
    kind: str
    display_text: str
    canonical_key: str
    start: int
    end: int

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "display_text": self.display_text,
            "canonical_key": self.canonical_key,
            "start": self.start,
            "end": self.end,
        }


@dataclass
class UtteranceRecord:
    speaker_agent_id: str | None
    speaker_name: str
    role_tag: str
    text: str
    spans: list[SpanRecord]

    def to_doc(self) -> dict:
        return {
            "speaker_agent_id": self.speaker_agent_id,
            "speaker_name": self.speaker_name,
            "role_tag": self.role_tag,
            "text": self.text,
            "spans": [s.to_doc() for s in self.spans],
        }


def utterance_record(
    parsed: ParsedUtterance, speaker_agent_id: str | None
) -> UtteranceRecord:
    return UtteranceRecord(
        speaker_agent_id=speaker_agent_id,
        speaker_name=parsed.speaker_name,
        role_tag=parsed.role_tag,
        text=parsed.plain_text,
        spans=[
            SpanRecord(
                kind=s.kind.value,
                display_text=s.display_text,
                canonical_key=s.canonical_key,
                start=s.start,
                end=s.end,
            )
            for s in parsed.spans
        ],
    )


def record_to_parsed(record: UtteranceRecord) -> ParsedUtterance:
    from .annotation import AnnotationSpan

    return ParsedUtterance(
        speaker_name=record.speaker_name,
        role_tag=record.role_tag,
        plain_text=record.text,
        spans=[
            AnnotationSpan(
                kind=SpanKind(s.kind),
                display_text=s.display_text,
                canonical_key=s.canonical_key,
                start=s.start,
                end=s.end,
            )
            for s in record.spans
        ],
    )


# Message roles: "user" and "assistant" are displayable conversation turns;
# "context" messages carry grounding text into the provider stream only.
@dataclass
class Message:
    message_id: str
    turn: int
    role: str
    content: str
    display: bool = True
    utterances: list[UtteranceRecord] = field(default_factory=list)
    option_key: str | None = None

    def to_doc(self) -> dict:
        return {
            "message_id": self.message_id,
            "turn": self.turn,
            "role": self.role,
            "content": self.content,
            "display": self.display,
            "utterances": [u.to_doc() for u in self.utterances],
            "option_key": self.option_key,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Message":
        return cls(
            message_id=doc["message_id"],
            turn=doc["turn"],
            role=doc["role"],
            content=doc["content"],
            display=doc["display"],
            utterances=[
                UtteranceRecord(
                    speaker_agent_id=u["speaker_agent_id"],
                    speaker_name=u["speaker_name"],
                    role_tag=u["role_tag"],
                    text=u["text"],
                    spans=[SpanRecord(**s) for s in u["spans"]],
                )
                for u in doc.get("utterances", [])
            ],
            option_key=doc.get("option_key"),
        )


class Session:
    def __init__(
        self,
        session_id: str,
        config: SessionConfig | None = None,
        clock=None,
    ):
        self.config = config or SessionConfig()
        self.clock = clock or make_clock(self.config.clock)
        self.session_id = session_id
        self.created_at = self.clock.now()
        self.messages: list[Message] = []
        self.registry = AgentRegistry()
        self.index = HistoryIndex()
        self.preferences = PreferenceSpace()
        self.hidden_agents: list[str] = []
        self.events: list[dict] = []
        self.turn_count = 0
        self.retry_count = 0
        self.grounding: dict[str, Any] = {}
        self.busy = False
        self._message_counter = 0
        self._agent_counter = 0

    def next_message_id(self) -> str:
        self._message_counter += 1
        return f"m{self._message_counter}"

    def next_agent_id(self) -> str:
        self._agent_counter += 1
        return f"a{self._agent_counter}"

    def log_event(self, kind: str, payload: dict) -> None:
        self.events.append(
            {
                "ts": self.clock.now(),
                "session_id": self.session_id,
                "kind": kind,
                "payload": payload,
            }
        )

    def visible_messages(self) -> list[Message]:
        return [m for m in self.messages if m.display]

    def latest_assistant_message(self) -> Message | None:
        for message in reversed(self.messages):
            if message.role == "assistant":
                return message
        return None

    def persona_utterances(self) -> list[UtteranceRecord]:
        records: list[UtteranceRecord] = []
        for message in self.messages:
            if message.role == "assistant":
                records.extend(message.utterances)
        return records
