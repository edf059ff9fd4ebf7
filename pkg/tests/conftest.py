from __future__ import annotations

import json
from pathlib import Path

import pytest

from council.engine import TurnKind, UserTurnInput, process_turn
from council.providers import ScriptedProvider
from council.session import Session, SessionConfig

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"

# The canonical three-persona completion from the annotation-format section of
# the prompt catalog, as it would arrive from a provider (real newlines
# between utterances).
THREE_PERSONA_EXAMPLE = (
    "@{Steven}(opinion): As a beginner who is trying to play with more %{spin}, "
    "I think the &{Babolat Pure Aero} is perfect for me. I think it's one of the top rackets.%%%\n\n"
    "@{Gina}(opinion): Yeah that's true @{Steven}, but %{spin} isn't the only skill to consider "
    "in tennis. As I'm starting to get into intermediate level tournaments, I'm trying to focus "
    "on rallying with solid pace. &{Wilson Blade} gives me the most %{control} — it even has "
    "really good %{spin}. I even think it's better than Babolat, which sometimes feels too "
    "%{stiff}.%%%\n\n"
    "@{Kenneth}(opinion): I'm more of a relaxed player, and I really like to play with %{control} "
    "so I can place the ball where I want on the court. What do you think? Do you have a "
    "preference when it comes to %{spin} and %{control}?%%%"
)

# A first-turn completion that satisfies every introduction rule (three
# criteria and one option per persona).
CLEAN_FIRST_TURN = (
    "@{Marlow}(opinion): Hi, I'm Marlow. I judge rackets on %{spin}, %{comfort}, and %{power}, "
    "and the &{Babolat Pure Aero} delivers all three for me.%%%\n\n"
    "@{Gina}(opinion): I'm Gina. %{control}, %{stability}, and %{feel} matter most to me, "
    "which is why I swing the &{Wilson Blade}.%%%\n\n"
    "@{Kenji}(opinion): Hello! I'm Kenji and I shop on %{value}, %{durability}, and %{comfort}; "
    "the &{Head Speed MP} was the obvious pick. What's your level?%%%"
)


def make_intro(name: str, criteria: list[str], option: str | None, extra: str = "") -> str:
    crit = " and ".join("%{" + c + "}" for c in criteria)
    opt = f" so I chose the &{{{option}}}." if option else "."
    return f"@{{{name}}}(opinion): Hi, I'm {name}. I care about {crit}{opt}{extra}%%%"


def make_first_turn(count: int) -> str:
    names = ["Asha", "Blair", "Cleo", "Dana", "Ezra", "Flor", "Gale", "Hero"]
    parts = [
        make_intro(
            names[i],
            [f"factor {i+1}a", f"factor {i+1}b", f"factor {i+1}c"],
            f"product {i+1}",
        )
        for i in range(count)
    ]
    return "\n\n".join(parts)


def scripted_session(
    completions: list[str],
    *,
    session_id: str = "t",
    max_retries: int = 2,
    domain_hint: str | None = None,
) -> tuple[Session, ScriptedProvider]:
    session = Session(
        session_id,
        config=SessionConfig(max_retries=max_retries, domain_hint=domain_hint, clock="logical"),
    )
    return session, ScriptedProvider(completions)


def run_message(session, provider, text="", tags=(), toggle=False, kind=TurnKind.CHAT, grounder=None):
    tag_ids = set()
    for name in tags:
        agent = session.registry.by_name(name)
        assert agent is not None, f"unknown tag {name}"
        tag_ids.add(agent.agent_id)
    return process_turn(
        session,
        UserTurnInput(text=text, tagged_agent_ids=tag_ids, preference_toggle=toggle, turn_kind=kind),
        provider,
        grounder=grounder,
    )


@pytest.fixture
def five_turn_fixture() -> dict:
    return json.loads((FIXTURES / "five_turn_session.json").read_text(encoding="utf-8"))
