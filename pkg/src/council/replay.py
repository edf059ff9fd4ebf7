"""Headless scripted sessions: drive a full conversation from a fixture file.

A replay fixture bundles everything a session needs offline: the user's
steps (messages, pins, visibility flips), the provider completions consumed
in request order, and optional grounding pages. Replays run on the logical
clock, so the same fixture always produces byte-identical session documents.
"""

from __future__ import annotations

import json
from pathlib import Path

from .annotation import normalize_keyword
from .engine import TurnKind, UserTurnInput, process_turn
from .grounding import FixtureFetcher, FixtureSearch, Grounder
from .index import pin, set_hidden, unpin
from .providers import ScriptedProvider
from .session import Session, SessionConfig
from .store import export_metrics


class FixtureError(Exception):
    pass


def load_fixture(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"cannot read fixture {path}: {exc}") from exc
    if "steps" not in doc or "completions" not in doc:
        raise FixtureError(f"fixture {path} needs 'steps' and 'completions'")
    return doc


def _tag_ids(session: Session, names: list[str]) -> set[str]:
    ids = set()
    for name in names:
        agent = session.registry.by_name(name)
        if agent is None:
            raise FixtureError(f"fixture tags unknown agent {name!r}")
        ids.add(agent.agent_id)
    return ids


def run_replay(fixture: dict | str | Path) -> Session:
    if not isinstance(fixture, dict):
        fixture = load_fixture(fixture)

    config_doc = fixture.get("config", {})
    config = SessionConfig(
        model=config_doc.get("model", "gpt-4"),
        max_retries=config_doc.get("max_retries", 2),
        grounding_budget=config_doc.get("grounding_budget", 4000),
        domain_hint=fixture.get("domain_hint"),
        clock="logical",
    )
    session = Session(fixture.get("session_id", "replay"), config=config)
    session.log_event("session_created", {})
    provider = ScriptedProvider(fixture["completions"])

    grounder = None
    grounding_doc = fixture.get("grounding")
    if grounding_doc:
        grounder = Grounder(
            FixtureSearch(grounding_doc.get("search", {})),
            FixtureFetcher(grounding_doc.get("pages", {})),
            budget_chars=config.grounding_budget,
        )

    for step in fixture["steps"]:
        action = step.get("action")
        if action == "message":
            turn_input = UserTurnInput(
                text=step.get("text", ""),
                tagged_agent_ids=_tag_ids(session, step.get("tags", [])),
                preference_toggle=step.get("toggle", False),
                turn_kind=TurnKind(step.get("kind", "chat")),
            )
            process_turn(session, turn_input, provider, grounder=grounder)
        elif action == "pin":
            pin(session.preferences, session.index, session.registry, step["kind"], step["key"])
            session.log_event("pin", {"kind": step["kind"], "key": normalize_keyword(step["key"])})
        elif action == "unpin":
            unpin(session.preferences, session.index, step["kind"], step["key"])
            session.log_event("unpin", {"kind": step["kind"], "key": normalize_keyword(step["key"])})
        elif action == "hide":
            set_hidden(session.index, step["key"], step.get("hidden", True))
            session.log_event(
                "visibility",
                {"key": normalize_keyword(step["key"]), "hidden": step.get("hidden", True)},
            )
        else:
            raise FixtureError(f"unknown step action {action!r}")

    return session


def replay_metrics(fixture: dict | str | Path) -> dict:
    return export_metrics(run_replay(fixture))
