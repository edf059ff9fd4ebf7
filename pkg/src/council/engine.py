"""Turn execution: prompt assembly, completion parsing, validation, commit.

A turn either commits atomically (messages, registry, index, events all
together) or leaves the session byte-identical to before. Intent detection is
delegated entirely to the prompted model; the engine only routes tags,
validates structure, and retries with a corrective note when the model breaks
the output contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .agents import (
    AgentProfile,
    TurnConstraintReport,
    TurnViolation,
    extract_profile,
    first_utterance_by_speaker,
    IntroRejected,
    speakers_in_order,
    validate_turn,
)
from .annotation import (
    Diagnostic,
    ParsedUtterance,
    Severity,
    normalize_keyword,
    parse_completion,
)
from .index import EntryKind, update_index
from .prompt_catalog import build_system_prompt
from .providers import ChatMessage, ChatProvider, ChatProviderRequest
from .session import Message, Session, utterance_record

PRE_PROMPT_HEADER = "[Conversation state]"
PREFERENCE_HEADER = "[User preferences]"
DEBATE_PHRASE = "debate each other"


class TurnKind(str, Enum):
    CHAT = "chat"
    DEBATE = "debate"
    INVITE_MORE = "invite_more"


class SessionBusyError(Exception):
    pass


class InvalidInputError(Exception):
    pass


class RetriesExhaustedError(Exception):
    def __init__(self, reasons: list[str], raw_completions: list[str]):
        self.reasons = reasons
        self.raw_completions = raw_completions
        super().__init__(f"turn rejected after retries: {'; '.join(reasons)}")


@dataclass
class PrePrompt:
    all_criteria: list[str]
    all_options: list[str]
    all_agents: list[str]
    pinned_criteria: list[str] | None
    pinned_options: list[str] | None
    pinned_agents: list[str] | None
    rendered: str


@dataclass
class UserTurnInput:
    text: str = ""
    tagged_agent_ids: set[str] = field(default_factory=set)
    preference_toggle: bool = False
    turn_kind: TurnKind = TurnKind.CHAT


@dataclass
class TurnResult:
    utterances: list[ParsedUtterance]
    new_agents: list[AgentProfile]
    constraint_report: TurnConstraintReport
    retries_used: int
    raw_completions: list[str]
    warnings: list[str] = field(default_factory=list)
    user_message_id: str = ""
    assistant_message_id: str = ""
    turn: int = 0


def _join(displays: list[str]) -> str:
    return ", ".join(displays) if displays else "(none)"


def build_pre_prompt(session: Session, toggle: bool) -> PrePrompt:
    """Ephemeral state summary prepended to the next user message.

    Hidden keywords are included (hiding is a display affordance only);
    the pinned lists exist only while the preference toggle is on.
    """
    criteria = session.index.displays_of_kind(EntryKind.CRITERION)
    options = session.index.displays_of_kind(EntryKind.OPTION)
    agents = [a.name for a in session.registry]
    rendered = (
        f"{PRE_PROMPT_HEADER}\n"
        f"Criteria so far: {_join(criteria)}\n"
        f"Options so far: {_join(options)}\n"
        f"Agents so far: {_join(agents)}\n"
    )
    pinned_criteria = pinned_options = pinned_agents = None
    if toggle:
        pinned_criteria = [
            session.index.get(k).display for k in session.preferences.pinned_criteria
        ]
        pinned_options = [
            session.index.get(k).display for k in session.preferences.pinned_options
        ]
        pinned_agents = []
        for key in session.preferences.pinned_agents:
            agent = session.registry.by_name(key)
            pinned_agents.append(agent.name if agent else key)
        rendered += (
            f"{PREFERENCE_HEADER}\n"
            f"Pinned criteria: {_join(pinned_criteria)}\n"
            f"Pinned options: {_join(pinned_options)}\n"
            f"Pinned agents: {_join(pinned_agents)}\n"
        )
    return PrePrompt(
        all_criteria=criteria,
        all_options=options,
        all_agents=agents,
        pinned_criteria=pinned_criteria,
        pinned_options=pinned_options,
        pinned_agents=pinned_agents,
        rendered=rendered,
    )


def tagged_names_in_order(session: Session, tagged_agent_ids: set[str]) -> list[str]:
    names = []
    for agent in session.registry:
        if agent.agent_id in tagged_agent_ids:
            names.append(agent.name)
    missing = tagged_agent_ids - {a.agent_id for a in session.registry}
    if missing:
        raise InvalidInputError(f"unknown agent ids: {sorted(missing)}")
    return names


def compose_user_body(session: Session, turn_input: UserTurnInput) -> str:
    """The durable part of the user message: tag header, text, debate cue."""
    parts = []
    names = tagged_names_in_order(session, turn_input.tagged_agent_ids)
    if names:
        parts.append(" ".join(f"@{{{name}}}" for name in names))
    if turn_input.text:
        parts.append(turn_input.text)
    if turn_input.turn_kind is TurnKind.DEBATE:
        parts.append(f"Please {DEBATE_PHRASE}.")
    return " ".join(parts)


def validate_input(session: Session, turn_input: UserTurnInput) -> None:
    if turn_input.turn_kind is TurnKind.DEBATE and len(turn_input.tagged_agent_ids) < 2:
        raise InvalidInputError("debate needs at least two tagged agents")
    tagged_names_in_order(session, turn_input.tagged_agent_ids)


def assemble_request(session: Session, turn_input: UserTurnInput) -> ChatProviderRequest:
    """System prompt, committed history, then the fresh pre-prompted message.

    Pre-prompts from earlier turns never reappear: only the body of each past
    user message was committed. Grounding context rides along as system-role
    messages in stream order.
    """
    if session.busy:
        raise SessionBusyError(session.session_id)
    return _assemble(session, turn_input)


def _assemble(session: Session, turn_input: UserTurnInput) -> ChatProviderRequest:
    validate_input(session, turn_input)
    messages = [ChatMessage("system", build_system_prompt(session.config.domain_hint))]
    for message in session.messages:
        if message.role == "user":
            messages.append(ChatMessage("user", message.content))
        elif message.role == "assistant":
            messages.append(ChatMessage("assistant", message.content))
        elif message.role == "context":
            messages.append(ChatMessage("system", message.content))
    pre_prompt = build_pre_prompt(session, turn_input.preference_toggle)
    body = compose_user_body(session, turn_input)
    messages.append(ChatMessage("user", pre_prompt.rendered + "\n" + body))
    return ChatProviderRequest(
        messages=messages,
        model_hint=session.config.model,
        max_retries_remaining=session.config.max_retries,
    )


def _rejection_reasons(
    utterances: list[ParsedUtterance],
    diagnostics: list[Diagnostic],
    report: TurnConstraintReport,
    is_first_turn: bool,
    debate: bool,
) -> list[str]:
    reasons = []
    if not utterances:
        reasons.append("no parseable persona utterances")
    for diag in diagnostics:
        if diag.severity is Severity.ERROR:
            reasons.append(f"{diag.code.value} at utterance {diag.ordinal}")
    if is_first_turn:
        if TurnViolation.TOO_FEW_FIRST_TURN in report.violations:
            reasons.append("first turn must introduce at least 3 personas")
        if TurnViolation.TOO_MANY_FIRST_TURN in report.violations:
            reasons.append("first turn must introduce at most 6 personas")
    elif not debate and TurnViolation.TOO_MANY_NEW in report.violations:
        reasons.append("at most 3 new personas per turn")
    if TurnViolation.INTRO_MISSING_OPTION in report.violations:
        reasons.append("every new persona must introduce exactly one &{option}")
    return reasons


_CORRECTIVE_NOTE = (
    "Format correction: your previous response was rejected because: {reasons}. "
    "Respond again. Every persona must speak as \"@{{Name}}(opinion): ...\" and end "
    "with %%%. New personas introduce themselves with at least three %{{criteria}} "
    "and exactly one &{{option}}."
)


def process_turn(
    session: Session,
    turn_input: UserTurnInput,
    provider: ChatProvider,
    grounder=None,
    progress: Callable[[str, dict], None] | None = None,
) -> TurnResult:
    """Run one user turn end to end; commit on success, change nothing on failure.

    A completion is rejected (and retried with a corrective note, up to the
    configured retry budget) when nothing parses, any parse error occurs, the
    new-persona count breaks the first-turn [3,6] or later-turn <=3 bounds, or
    a new persona's introduction is rejected. Debate turns tolerate newcomers
    with a warning instead of rejecting them.
    """
    if session.busy:
        raise SessionBusyError(session.session_id)
    validate_input(session, turn_input)

    session.busy = True
    try:
        return _process_turn_locked(session, turn_input, provider, grounder, progress)
    finally:
        session.busy = False


def _process_turn_locked(
    session: Session,
    turn_input: UserTurnInput,
    provider: ChatProvider,
    grounder,
    progress: Callable[[str, dict], None] | None,
) -> TurnResult:
    def emit(event: str, **payload) -> None:
        if progress is not None:
            progress(event, payload)

    is_first_turn = session.turn_count == 0
    debate = turn_input.turn_kind is TurnKind.DEBATE
    tagged_names = set(tagged_names_in_order(session, turn_input.tagged_agent_ids))
    request = _assemble(session, turn_input)
    pre_prompt = build_pre_prompt(session, turn_input.preference_toggle)
    body = compose_user_body(session, turn_input)

    emit("accepted", turn=session.turn_count + 1)

    raw_completions: list[str] = []
    retry_log: list[dict] = []
    attempts = session.config.max_retries + 1
    utterances: list[ParsedUtterance] = []
    report: TurnConstraintReport | None = None
    last_reasons: list[str] = []

    for attempt in range(attempts):
        completion = provider.complete(request)
        raw_completions.append(completion)
        utterances, diagnostics = parse_completion(completion)
        report = validate_turn(
            session.registry,
            utterances,
            is_first_turn,
            tagged_names=tagged_names or None,
            debate=debate,
        )
        reasons = _rejection_reasons(utterances, diagnostics, report, is_first_turn, debate)
        # Zero-criteria introductions are rejected outright, unlike the
        # tolerated one-or-two-criteria case.
        intros = first_utterance_by_speaker(utterances)
        for name, intro in intros.items():
            if not session.registry.has_name(name) and intro.options():
                if not {s.canonical_key for s in intro.criteria()}:
                    reasons.append(
                        f"new persona {intro.speaker_name!r} introduced no %{{criteria}}"
                    )
        if not reasons:
            break
        last_reasons = reasons
        retry_log.append({"attempt": attempt + 1, "reasons": reasons})
        if attempt + 1 >= attempts:
            raise RetriesExhaustedError(reasons, raw_completions)
        emit("retrying", attempt=attempt + 1, reasons=reasons)
        request.messages = list(request.messages) + [
            ChatMessage("system", _CORRECTIVE_NOTE.format(reasons="; ".join(reasons)))
        ]
        request.max_retries_remaining -= 1

    retries_used = len(raw_completions) - 1
    assert report is not None

    # Build new profiles before touching any state: commit must not fail.
    # The rejection checks above already ruled out every extraction error,
    # so the id counter rolls back only on logic drift.
    new_profiles: list[AgentProfile] = []
    advisories: list[str] = []
    intro_of = first_utterance_by_speaker(utterances)
    turn = session.turn_count + 1
    agent_counter_before = session._agent_counter
    try:
        for name in speakers_in_order(utterances):
            if session.registry.has_name(name):
                continue
            intro = intro_of[_norm(name)]
            profile, profile_advisories = extract_profile(
                intro, turn, agent_id=session.next_agent_id()
            )
            new_profiles.append(profile)
            advisories.extend(f"{name}: {a.value}" for a in profile_advisories)
    except IntroRejected:
        session._agent_counter = agent_counter_before
        raise

    warnings = list(advisories)
    if debate and report.new_agent_count > 0:
        warnings.append(
            f"debate turn introduced {report.new_agent_count} new persona(s); kept"
        )

    # Commit.
    session.log_event("pre_prompt", {"turn": turn, "rendered": pre_prompt.rendered})
    for entry in retry_log:
        session.log_event("turn_retry", {"turn": turn, **entry})
    user_message = Message(
        message_id=session.next_message_id(),
        turn=turn,
        role="user",
        content=body,
    )
    session.messages.append(user_message)
    session.registry.register_agents(new_profiles)
    id_by_name = {_norm(a.name): a.agent_id for a in session.registry}
    records = [
        utterance_record(u, id_by_name.get(_norm(u.speaker_name))) for u in utterances
    ]
    assistant_message = Message(
        message_id=session.next_message_id(),
        turn=turn,
        role="assistant",
        content=raw_completions[-1],
        utterances=records,
    )
    session.messages.append(assistant_message)
    for profile in new_profiles:
        profile.intro_message_id = assistant_message.message_id
    update_index(session.index, utterances, session.registry)
    session.turn_count = turn
    session.retry_count += retries_used
    session.log_event(
        "turn_committed",
        {
            "turn": turn,
            "user_message_id": user_message.message_id,
            "assistant_message_id": assistant_message.message_id,
            "new_agents": [p.agent_id for p in new_profiles],
            "constraint_report": report.to_doc(),
            "retries_used": retries_used,
            "warnings": warnings,
            "turn_kind": turn_input.turn_kind.value,
            "preference_toggle": turn_input.preference_toggle,
        },
    )

    # Grounding runs after commit and never blocks it; context messages land
    # in the stream before the next request is assembled.
    if grounder is not None:
        for profile in new_profiles:
            option_key = profile.chosen_option
            display = (
                session.index.get(option_key).display
                if option_key in session.index
                else profile.name
            )
            try:
                grounder.ground(session, option_key, display)
            except Exception:
                pass

    result = TurnResult(
        utterances=utterances,
        new_agents=new_profiles,
        constraint_report=report,
        retries_used=retries_used,
        raw_completions=raw_completions,
        warnings=warnings,
        user_message_id=user_message.message_id,
        assistant_message_id=assistant_message.message_id,
        turn=turn,
    )
    emit("committed", turn=turn, retries_used=retries_used)
    return result


def trigger_debate(
    session: Session,
    agent_ids: set[str],
    provider: ChatProvider,
    text: str = "",
    preference_toggle: bool = False,
    grounder=None,
) -> TurnResult:
    """Ask two or more named agents to argue their options against each other."""
    if len(agent_ids) < 2:
        raise InvalidInputError("debate needs at least two tagged agents")
    turn_input = UserTurnInput(
        text=text,
        tagged_agent_ids=set(agent_ids),
        preference_toggle=preference_toggle,
        turn_kind=TurnKind.DEBATE,
    )
    return process_turn(session, turn_input, provider, grounder=grounder)


def _norm(name: str) -> str:
    return normalize_keyword(name)
