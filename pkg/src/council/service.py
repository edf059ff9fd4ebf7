"""HTTP facade over the engine and state store, plus service configuration.

Every state transition visible through the API is exactly the corresponding
engine or store operation; handlers validate, delegate, persist, and shape
views. One turn may be in flight per session; concurrent sends get a 409.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from . import grounding as grounding_mod
from .agents import agent_appearance
from .annotation import normalize_keyword
from .engine import (
    InvalidInputError,
    RetriesExhaustedError,
    SessionBusyError,
    TurnKind,
    TurnResult,
    UserTurnInput,
    process_turn,
)
from .index import UnknownKeyError, associations, pin, set_hidden, unpin
from .providers import (
    LLM_API_KEY_ENV,
    OpenAIChatProvider,
    ProviderError,
    ScriptedProvider,
)
from .session import Message, Session, SessionConfig
from .store import SessionStore, export_metrics


class ConfigError(Exception):
    pass


@dataclass
class ServiceConfig:
    port: int = 8040
    provider: str = "scripted"  # "scripted" | "live"
    fixture: str | None = None
    model: str = "gpt-4"
    search: str = "none"  # "fixture" | "live" | "none"
    search_fixture: str | None = None
    grounding_budget: int = grounding_mod.DEFAULT_BUDGET_CHARS
    max_retries: int = 2
    data_dir: str = "./data"
    domain_hint: str | None = None
    clock: str = "wall"
    static_dir: str | None = None

    def validate(self) -> None:
        if self.provider == "scripted":
            if not self.fixture or not Path(self.fixture).is_file():
                raise ConfigError("scripted provider needs a readable 'fixture' path")
        elif self.provider == "live":
            if not os.environ.get(LLM_API_KEY_ENV):
                raise ConfigError(f"live provider needs {LLM_API_KEY_ENV} in the environment")
        else:
            raise ConfigError(f"unknown provider {self.provider!r}")
        if self.search == "fixture":
            if not self.search_fixture or not Path(self.search_fixture).is_file():
                raise ConfigError("fixture search needs a readable 'search_fixture' path")
        elif self.search == "live":
            if not os.environ.get(grounding_mod.SEARCH_ENDPOINT_ENV):
                raise ConfigError(
                    f"live search needs {grounding_mod.SEARCH_ENDPOINT_ENV} in the environment"
                )
        elif self.search != "none":
            raise ConfigError(f"unknown search mode {self.search!r}")


_INT_KEYS = {"port", "grounding_budget", "max_retries"}


def parse_config(path: str | Path) -> ServiceConfig:
    """Read the documented `key = value` config format."""
    config = ServiceConfig()
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not hasattr(config, key):
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        if key in _INT_KEYS:
            try:
                setattr(config, key, int(value))
            except ValueError:
                raise ConfigError(f"{path}:{line_no}: {key} must be an integer") from None
        else:
            setattr(config, key, value)
    return config


def build_grounder(config: ServiceConfig) -> grounding_mod.Grounder | None:
    if config.search == "none":
        return None
    if config.search == "fixture":
        doc = json.loads(Path(config.search_fixture).read_text(encoding="utf-8"))
        return grounding_mod.Grounder(
            grounding_mod.FixtureSearch(doc.get("search", {})),
            grounding_mod.FixtureFetcher(doc.get("pages", {})),
            budget_chars=config.grounding_budget,
        )
    return grounding_mod.Grounder(
        grounding_mod.HttpSearch(),
        grounding_mod.HttpFetcher(),
        budget_chars=config.grounding_budget,
    )


class ServiceRuntime:
    def __init__(self, config: ServiceConfig):
        config.validate()
        self.config = config
        self.store = SessionStore(config.data_dir)
        self.sessions: dict[str, Session] = {}
        self.locks: dict[str, threading.Lock] = {}
        self.providers: dict[str, ScriptedProvider] = {}
        self.grounder = build_grounder(config)
        self._registry_lock = threading.Lock()
        if config.provider == "scripted":
            self._script = ScriptedProvider.from_file(config.fixture)._completions
        else:
            self._script = None
            self._live_provider = OpenAIChatProvider()

    def create_session(self) -> Session:
        session_id = uuid.uuid4().hex[:12]
        session = Session(
            session_id,
            config=SessionConfig(
                model=self.config.model,
                max_retries=self.config.max_retries,
                grounding_budget=self.config.grounding_budget,
                domain_hint=self.config.domain_hint,
                clock=self.config.clock,
            ),
        )
        with self._registry_lock:
            self.sessions[session_id] = session
            self.locks[session_id] = threading.Lock()
        session.log_event("session_created", {})
        self.store.save(session)
        return session

    def get_session(self, session_id: str) -> Session:
        with self._registry_lock:
            if session_id in self.sessions:
                return self.sessions[session_id]
        try:
            session = self.store.load(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session") from None
        with self._registry_lock:
            self.sessions.setdefault(session_id, session)
            self.locks.setdefault(session_id, threading.Lock())
            return self.sessions[session_id]

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self.locks[session_id]

    def provider_for(self, session: Session):
        if self._script is not None:
            if session.session_id not in self.providers:
                self.providers[session.session_id] = ScriptedProvider(self._script)
            return self.providers[session.session_id]
        return self._live_provider


class MessageBody(BaseModel):
    text: str = ""
    tagged_agent_ids: list[str] = Field(default_factory=list)
    preference_toggle: bool = False
    turn_kind: Literal["chat", "debate", "invite_more"] = "chat"


class PinBody(BaseModel):
    kind: Literal["agent", "criterion", "option"]
    key: str


class VisibilityBody(BaseModel):
    key: str
    hidden: bool


def span_view(span) -> dict:
    return {
        "kind": span.kind,
        "display_text": span.display_text,
        "canonical_key": span.canonical_key,
        "start": span.start,
        "end": span.end,
    }


def utterance_view(message: Message, record, current: bool) -> dict:
    return {
        "message_id": message.message_id,
        "turn": message.turn,
        "speaker_agent_id": record.speaker_agent_id,
        "speaker_name": record.speaker_name,
        "text": record.text,
        "spans": [span_view(s) for s in record.spans],
        "current": current,
    }


def agent_view(session: Session, profile) -> dict:
    return {
        "agent_id": profile.agent_id,
        "name": profile.name,
        "descriptor": profile.descriptor,
        "valued_criteria": [
            {
                "key": key,
                "display": session.index.get(key).display if key in session.index else key,
            }
            for key in profile.valued_criteria
        ],
        "chosen_option": {
            "key": profile.chosen_option,
            "display": (
                session.index.get(profile.chosen_option).display
                if profile.chosen_option in session.index
                else profile.chosen_option
            ),
            "source_url": profile.source_url,
        },
        "created_turn": profile.created_turn,
        "appearance": agent_appearance(profile.name),
        "hidden": profile.agent_id in session.hidden_agents,
    }


def state_view(session: Session) -> dict:
    latest = session.latest_assistant_message()
    current_utterances = (
        [utterance_view(latest, record, True) for record in latest.utterances]
        if latest
        else []
    )
    return {
        "session_id": session.session_id,
        "created_at": session.created_at,
        "turn_count": session.turn_count,
        "busy": session.busy,
        "current_utterances": current_utterances,
        "agents": [agent_view(session, a) for a in session.registry],
        "index": session.index.to_doc(),
        "preference_space": session.preferences.to_doc(),
        "metrics": export_metrics(session),
    }


def transcript_view(session: Session, audit: bool) -> list[dict]:
    pre_prompts = {
        e["payload"]["turn"]: e["payload"]["rendered"]
        for e in session.events
        if e["kind"] == "pre_prompt"
    }
    thread: list[dict] = []
    for message in session.messages:
        if message.role == "user":
            if audit and message.turn in pre_prompts:
                thread.append(
                    {
                        "type": "pre_prompt",
                        "turn": message.turn,
                        "text": pre_prompts[message.turn],
                    }
                )
            thread.append(
                {
                    "type": "user",
                    "message_id": message.message_id,
                    "turn": message.turn,
                    "text": message.content,
                }
            )
        elif message.role == "assistant":
            for record in message.utterances:
                thread.append(
                    {
                        "type": "persona",
                        "message_id": message.message_id,
                        "turn": message.turn,
                        "speaker_agent_id": record.speaker_agent_id,
                        "speaker_name": record.speaker_name,
                        "text": record.text,
                        "spans": [span_view(s) for s in record.spans],
                    }
                )
        elif message.role == "context" and audit:
            thread.append(
                {
                    "type": "context",
                    "message_id": message.message_id,
                    "turn": message.turn,
                    "option_key": message.option_key,
                    "text": message.content,
                }
            )
    return thread


def turn_result_view(session: Session, result: TurnResult) -> dict:
    latest = session.latest_assistant_message()
    touched: dict[str, dict] = {}
    for record in latest.utterances if latest else []:
        for span in record.spans:
            key = span.canonical_key
            if key in session.index and key not in touched:
                touched[key] = session.index.get(key).to_doc(key)
    return {
        "turn": result.turn,
        "retries_used": result.retries_used,
        "utterances": (
            [utterance_view(latest, record, True) for record in latest.utterances]
            if latest
            else []
        ),
        "new_agents": [agent_view(session, profile) for profile in result.new_agents],
        "constraint_report": result.constraint_report.to_doc(),
        "warnings": result.warnings,
        "index_delta": list(touched.values()),
    }


def create_app(config: ServiceConfig) -> FastAPI:
    runtime = ServiceRuntime(config)
    app = FastAPI(title="council", version="0.1.0")
    app.state.runtime = runtime

    def run_turn(session: Session, body: MessageBody, progress=None) -> TurnResult:
        turn_input = UserTurnInput(
            text=body.text,
            tagged_agent_ids=set(body.tagged_agent_ids),
            preference_toggle=body.preference_toggle,
            turn_kind=TurnKind(body.turn_kind),
        )
        provider = runtime.provider_for(session)
        return process_turn(
            session,
            turn_input,
            provider,
            grounder=runtime.grounder,
            progress=progress,
        )

    @app.post("/sessions", status_code=201)
    def create_session():
        session = runtime.create_session()
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return state_view(runtime.get_session(session_id))

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str, audit: bool = Query(default=False)):
        session = runtime.get_session(session_id)
        return {"transcript": transcript_view(session, audit)}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody, stream: bool = Query(default=False)):
        session = runtime.get_session(session_id)
        lock = runtime.lock_for(session_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a turn is already in flight")

        if not stream:
            try:
                result = run_turn(session, body)
            except (InvalidInputError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            except SessionBusyError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except (RetriesExhaustedError, ProviderError) as exc:
                raise HTTPException(status_code=502, detail=str(exc)) from exc
            finally:
                lock.release()
            runtime.store.save(session)
            return turn_result_view(session, result)

        events: queue.Queue = queue.Queue()

        def progress(event: str, payload: dict) -> None:
            events.put({"event": event, **payload})

        def worker() -> None:
            try:
                result = run_turn(session, body, progress=progress)
                runtime.store.save(session)
                events.put({"event": "result", "result": turn_result_view(session, result)})
            except (InvalidInputError, ValueError) as exc:
                events.put({"event": "failed", "status": 422, "error": str(exc)})
            except (RetriesExhaustedError, ProviderError) as exc:
                events.put({"event": "failed", "status": 502, "error": str(exc)})
            except Exception as exc:  # pragma: no cover
                events.put({"event": "failed", "status": 500, "error": str(exc)})
            finally:
                events.put(None)
                lock.release()

        threading.Thread(target=worker, daemon=True).start()

        def event_lines():
            while True:
                item = events.get()
                if item is None:
                    break
                yield json.dumps(item) + "\n"

        return StreamingResponse(event_lines(), media_type="application/x-ndjson")

    @app.get("/sessions/{session_id}/associations/{key}")
    def get_associations(session_id: str, key: str):
        session = runtime.get_session(session_id)
        try:
            linked = associations(session.index, session.registry, key)
        except (UnknownKeyError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=f"unknown key {key!r}") from exc
        return linked

    @app.post("/sessions/{session_id}/pins")
    def add_pin(session_id: str, body: PinBody):
        session = runtime.get_session(session_id)
        try:
            pin(session.preferences, session.index, session.registry, body.kind, body.key)
        except (UnknownKeyError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=f"unknown {body.kind}: {body.key}") from exc
        session.log_event("pin", {"kind": body.kind, "key": body.key})
        runtime.store.save(session)
        return {"preference_space": session.preferences.to_doc()}

    @app.delete("/sessions/{session_id}/pins/{kind}/{key}")
    def remove_pin(session_id: str, kind: str, key: str):
        session = runtime.get_session(session_id)
        try:
            bucket = session.preferences.bucket(kind)
        except ValueError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        if normalize_keyword(key) not in bucket:
            raise HTTPException(status_code=404, detail=f"{key!r} is not pinned")
        unpin(session.preferences, session.index, kind, key)
        session.log_event("unpin", {"kind": kind, "key": key})
        runtime.store.save(session)
        return {"preference_space": session.preferences.to_doc()}

    @app.post("/sessions/{session_id}/visibility")
    def set_visibility(session_id: str, body: VisibilityBody):
        session = runtime.get_session(session_id)
        if body.key in session.index or _normalized_in_index(session, body.key):
            set_hidden(session.index, body.key, body.hidden)
            key = normalize_keyword(body.key)
            entry = session.index.get(key)
            session.log_event("visibility", {"key": key, "hidden": body.hidden})
            runtime.store.save(session)
            return {"entry": entry.to_doc(key)}
        agent = session.registry.by_name(body.key)
        if agent is not None:
            if body.hidden and agent.agent_id not in session.hidden_agents:
                session.hidden_agents.append(agent.agent_id)
            elif not body.hidden and agent.agent_id in session.hidden_agents:
                session.hidden_agents.remove(agent.agent_id)
            session.log_event(
                "visibility", {"agent_id": agent.agent_id, "hidden": body.hidden}
            )
            runtime.store.save(session)
            return {"agent": agent_view(session, agent)}
        raise HTTPException(status_code=404, detail=f"unknown key {body.key!r}")

    if config.static_dir and Path(config.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def _normalized_in_index(session: Session, key: str) -> bool:
    try:
        return normalize_keyword(key) in session.index
    except ValueError:
        return False
