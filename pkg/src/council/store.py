"""Session persistence and metric export.

One portable JSON document per session plus an append-only event-log file
(one JSON record per line). Serialization is deterministic: the same session
always produces the same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from .agents import AgentRegistry
from .index import HistoryIndex, PreferenceSpace
from .session import LogicalClock, Message, Session, SessionConfig, make_clock

DOCUMENT_VERSION = 1


class CorruptDocumentError(Exception):
    pass


class VersionMismatchError(Exception):
    pass


def export_metrics(session: Session) -> dict:
    """Flat interaction metrics for a session (search-behavior style counts)."""
    user_message_count = sum(1 for m in session.messages if m.role == "user")
    return {
        "user_message_count": user_message_count,
        "turn_count": session.turn_count,
        "retry_count": session.retry_count,
        "agent_count": len(session.registry),
        "pinned_criteria": len(session.preferences.pinned_criteria),
        "pinned_options": len(session.preferences.pinned_options),
        "pinned_agents": len(session.preferences.pinned_agents),
        "pinned_total": session.preferences.total(),
    }


def to_document(session: Session) -> dict:
    clock_state = session.clock._tick if isinstance(session.clock, LogicalClock) else None
    return {
        "version": DOCUMENT_VERSION,
        "session_id": session.session_id,
        "created_at": session.created_at,
        "config": session.config.to_doc(),
        "messages": [m.to_doc() for m in session.messages],
        "agents": session.registry.to_doc(),
        "index": session.index.to_doc(),
        "preference_space": session.preferences.to_doc(),
        "hidden_agents": list(session.hidden_agents),
        "events": list(session.events),
        "counters": {
            "turn_count": session.turn_count,
            "retry_count": session.retry_count,
            "message_counter": session._message_counter,
            "agent_counter": session._agent_counter,
            "clock_state": clock_state,
        },
        "grounding": {k: session.grounding[k] for k in sorted(session.grounding)},
    }


def serialize(session: Session) -> bytes:
    doc = to_document(session)
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def load(data: bytes) -> Session:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptDocumentError(str(exc)) from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptDocumentError("not a session document")
    if doc["version"] != DOCUMENT_VERSION:
        raise VersionMismatchError(f"unsupported document version {doc['version']!r}")
    try:
        config = SessionConfig.from_doc(doc["config"])
        counters = doc["counters"]
        clock_state = counters.get("clock_state")
        clock = make_clock(config.clock, clock_state or 0)
        session = Session(doc["session_id"], config=config, clock=clock)
        # Creation already consumed state; restore the recorded values.
        session.created_at = doc["created_at"]
        if isinstance(clock, LogicalClock) and clock_state is not None:
            clock._tick = clock_state
        session.messages = [Message.from_doc(m) for m in doc["messages"]]
        session.registry = AgentRegistry.from_doc(doc["agents"])
        session.index = HistoryIndex.from_doc(doc["index"])
        session.preferences = PreferenceSpace.from_doc(doc["preference_space"])
        session.hidden_agents = list(doc["hidden_agents"])
        session.events = list(doc["events"])
        session.turn_count = counters["turn_count"]
        session.retry_count = counters["retry_count"]
        session._message_counter = counters["message_counter"]
        session._agent_counter = counters["agent_counter"]
        session.grounding = dict(doc["grounding"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDocumentError(f"malformed session document: {exc}") from exc
    return session


class SessionStore:
    """Filesystem persistence: <id>.json document + <id>.events.jsonl log."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._flushed_events: dict[str, int] = {}

    def document_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.json"

    def event_log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.events.jsonl"

    def save(self, session: Session) -> None:
        path = self.document_path(session.session_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_bytes(serialize(session))
        tmp.replace(path)
        flushed = self._flushed_events.get(session.session_id, 0)
        new_events = session.events[flushed:]
        if new_events:
            with self.event_log_path(session.session_id).open("a", encoding="utf-8") as fh:
                for event in new_events:
                    fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._flushed_events[session.session_id] = len(session.events)

    def load(self, session_id: str) -> Session:
        path = self.document_path(session_id)
        if not path.exists():
            raise KeyError(session_id)
        session = load(path.read_bytes())
        self._flushed_events[session_id] = len(session.events)
        return session

    def list_sessions(self) -> list[str]:
        return sorted(
            p.stem for p in self.data_dir.glob("*.json") if not p.stem.endswith(".events")
        )
