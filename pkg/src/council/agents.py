"""Persona identities and per-turn population rules.

A profile is frozen at the persona's introduction: later utterances add to
the conversation index but never mutate the profile's valued criteria or
chosen option.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum

from .annotation import ParsedUtterance, normalize_keyword

RESERVED_NAME = "user"

#: Population bounds prompted into the model and enforced on its output.
FIRST_TURN_MIN_NEW = 3
FIRST_TURN_MAX_NEW = 6
LATER_TURN_MAX_NEW = 3
SPEAKERS_MIN = 2
SPEAKERS_MAX = 4
INTRO_MIN_CRITERIA = 3

PALETTE = [
    "#4c72b0",
    "#dd8452",
    "#55a868",
    "#c44e52",
    "#8172b3",
    "#937860",
    "#da8bc3",
    "#8c8c8c",
    "#ccb974",
    "#64b5cd",
]


class TurnViolation(str, Enum):
    TOO_FEW_FIRST_TURN = "too_few_first_turn"
    TOO_MANY_FIRST_TURN = "too_many_first_turn"
    TOO_MANY_NEW = "too_many_new"
    TOO_FEW_SPEAKERS = "too_few_speakers"
    TOO_MANY_SPEAKERS = "too_many_speakers"
    INTRO_MISSING_OPTION = "intro_missing_option"
    INTRO_UNDER_THREE_CRITERIA = "intro_under_three_criteria"


class IntroRejected(Exception):
    """An introduction that cannot yield a valid profile."""

    def __init__(self, violation: TurnViolation, speaker: str):
        self.violation = violation
        self.speaker = speaker
        super().__init__(f"{speaker}: {violation.value}")


class RegistrationError(Exception):
    pass


@dataclass
class AgentProfile:
    agent_id: str
    name: str
    descriptor: str
    valued_criteria: list[str]
    chosen_option: str
    source_url: str | None = None
    created_turn: int = 0
    intro_message_id: str | None = None

    def copy(self) -> "AgentProfile":
        return replace(self, valued_criteria=list(self.valued_criteria))


@dataclass(frozen=True)
class TurnConstraintReport:
    is_first_turn: bool
    new_agent_count: int
    speaker_count: int
    violations: tuple[TurnViolation, ...] = ()

    def to_doc(self) -> dict:
        return {
            "is_first_turn": self.is_first_turn,
            "new_agent_count": self.new_agent_count,
            "speaker_count": self.speaker_count,
            "violations": [v.value for v in self.violations],
        }


def extract_profile(
    intro: ParsedUtterance,
    turn: int,
    *,
    agent_id: str,
    intro_message_id: str | None = None,
) -> tuple[AgentProfile, list[TurnViolation]]:
    """Distill a profile from a persona's first-ever utterance.

    Criteria are every criterion span in order (deduplicated on canonical
    key); the chosen option is the first option span; the descriptor is the
    intro's plain text. Fewer than three criteria is tolerated with an
    advisory. No option span, or no criteria at all, rejects the intro.
    """
    criteria: list[str] = []
    for span in intro.criteria():
        if span.canonical_key not in criteria:
            criteria.append(span.canonical_key)
    options = intro.options()
    if not options:
        raise IntroRejected(TurnViolation.INTRO_MISSING_OPTION, intro.speaker_name)
    if not criteria:
        raise IntroRejected(
            TurnViolation.INTRO_UNDER_THREE_CRITERIA, intro.speaker_name
        )
    advisories: list[TurnViolation] = []
    if len(criteria) < INTRO_MIN_CRITERIA:
        advisories.append(TurnViolation.INTRO_UNDER_THREE_CRITERIA)
    profile = AgentProfile(
        agent_id=agent_id,
        name=intro.speaker_name,
        descriptor=intro.plain_text,
        valued_criteria=criteria,
        chosen_option=options[0].canonical_key,
        created_turn=turn,
        intro_message_id=intro_message_id,
    )
    return profile, advisories


class AgentRegistry:
    """Spawn-ordered map of agent id to profile, with a name lookup."""

    def __init__(self) -> None:
        self._agents: dict[str, AgentProfile] = {}
        self._by_name: dict[str, str] = {}

    def __len__(self) -> int:
        return len(self._agents)

    def __iter__(self):
        return iter(self._agents.values())

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self._agents

    @property
    def agents(self) -> list[AgentProfile]:
        return list(self._agents.values())

    def get(self, agent_id: str) -> AgentProfile | None:
        return self._agents.get(agent_id)

    def by_name(self, name: str) -> AgentProfile | None:
        agent_id = self._by_name.get(normalize_keyword(name))
        return self._agents.get(agent_id) if agent_id else None

    def has_name(self, name: str) -> bool:
        return normalize_keyword(name) in self._by_name

    def register_agents(self, profiles: list[AgentProfile]) -> None:
        """Insert profiles atomically; any problem leaves the registry as-is."""
        staged: dict[str, str] = {}
        for profile in profiles:
            key = normalize_keyword(profile.name)
            if key == RESERVED_NAME:
                raise RegistrationError("agent name 'user' is reserved")
            if key in self._by_name or key in staged:
                raise RegistrationError(f"agent name {profile.name!r} already taken")
            if profile.agent_id in self._agents:
                raise RegistrationError(f"agent id {profile.agent_id!r} already taken")
            staged[key] = profile.agent_id
        for profile in profiles:
            self._agents[profile.agent_id] = profile
            self._by_name[normalize_keyword(profile.name)] = profile.agent_id

    def agents_by_criterion(self, key: str) -> list[str]:
        return [a.agent_id for a in self._agents.values() if key in a.valued_criteria]

    def agents_by_option(self, key: str) -> list[str]:
        return [a.agent_id for a in self._agents.values() if a.chosen_option == key]

    def to_doc(self) -> list[dict]:
        return [
            {
                "agent_id": a.agent_id,
                "name": a.name,
                "descriptor": a.descriptor,
                "valued_criteria": list(a.valued_criteria),
                "chosen_option": a.chosen_option,
                "source_url": a.source_url,
                "created_turn": a.created_turn,
                "intro_message_id": a.intro_message_id,
            }
            for a in self._agents.values()
        ]

    @classmethod
    def from_doc(cls, doc: list[dict]) -> "AgentRegistry":
        registry = cls()
        for item in doc:
            profile = AgentProfile(
                agent_id=item["agent_id"],
                name=item["name"],
                descriptor=item["descriptor"],
                valued_criteria=list(item["valued_criteria"]),
                chosen_option=item["chosen_option"],
                source_url=item.get("source_url"),
                created_turn=item.get("created_turn", 0),
                intro_message_id=item.get("intro_message_id"),
            )
            registry.register_agents([profile])
        return registry


def speakers_in_order(parsed_turn: list[ParsedUtterance]) -> list[str]:
    """Unique speaker names, first-spoken order."""
    seen: dict[str, str] = {}
    for utterance in parsed_turn:
        seen.setdefault(normalize_keyword(utterance.speaker_name), utterance.speaker_name)
    return list(seen.values())


def first_utterance_by_speaker(
    parsed_turn: list[ParsedUtterance],
) -> dict[str, ParsedUtterance]:
    first: dict[str, ParsedUtterance] = {}
    for utterance in parsed_turn:
        first.setdefault(normalize_keyword(utterance.speaker_name), utterance)
    return first


def validate_turn(
    registry_before: AgentRegistry,
    parsed_turn: list[ParsedUtterance],
    is_first_turn: bool,
    *,
    tagged_names: set[str] | None = None,
    debate: bool = False,
) -> TurnConstraintReport:
    """Check one completion's population against the prompted bounds.

    First turn wants 3..6 new personas. Later turns allow at most 3 new and
    2..4 speakers, except that a single speaker is fine when the user tagged
    exactly that agent. Debate turns expect no new personas at all, so any
    newcomer is reported (the engine tolerates it as a warning). Intro
    problems of new speakers are reported alongside the count violations.
    """
    speakers = speakers_in_order(parsed_turn)
    new_names = [n for n in speakers if not registry_before.has_name(n)]
    violations: list[TurnViolation] = []

    if is_first_turn:
        if len(new_names) < FIRST_TURN_MIN_NEW:
            violations.append(TurnViolation.TOO_FEW_FIRST_TURN)
        elif len(new_names) > FIRST_TURN_MAX_NEW:
            violations.append(TurnViolation.TOO_MANY_FIRST_TURN)
    else:
        max_new = 0 if debate else LATER_TURN_MAX_NEW
        if len(new_names) > max_new:
            violations.append(TurnViolation.TOO_MANY_NEW)
        tagged = {normalize_keyword(n) for n in tagged_names} if tagged_names else set()
        solo_tagged = (
            len(speakers) == 1
            and len(tagged) == 1
            and normalize_keyword(speakers[0]) in tagged
        )
        if len(speakers) < SPEAKERS_MIN and not solo_tagged:
            violations.append(TurnViolation.TOO_FEW_SPEAKERS)
        elif len(speakers) > SPEAKERS_MAX:
            violations.append(TurnViolation.TOO_MANY_SPEAKERS)

    intros = first_utterance_by_speaker(parsed_turn)
    for name in new_names:
        intro = intros[normalize_keyword(name)]
        if not intro.options():
            if TurnViolation.INTRO_MISSING_OPTION not in violations:
                violations.append(TurnViolation.INTRO_MISSING_OPTION)
        criteria_keys = {s.canonical_key for s in intro.criteria()}
        if len(criteria_keys) < INTRO_MIN_CRITERIA:
            if TurnViolation.INTRO_UNDER_THREE_CRITERIA not in violations:
                violations.append(TurnViolation.INTRO_UNDER_THREE_CRITERIA)

    return TurnConstraintReport(
        is_first_turn=is_first_turn,
        new_agent_count=len(new_names),
        speaker_count=len(speakers),
        violations=tuple(violations),
    )


def agent_appearance(name: str) -> dict:
    """Stable color/glyph for a persona, hashed from its normalized name."""
    digest = hashlib.md5(normalize_keyword(name).encode("utf-8")).hexdigest()
    bucket = int(digest, 16)
    return {
        "color": PALETTE[bucket % len(PALETTE)],
        "glyph": name.strip()[0].upper() if name.strip() else "?",
    }
