"""Running index of criteria/options plus the user's pinned preferences.

The index is derived state: its counts must always equal what a full rescan
of committed persona messages would find. Hiding is presentation-only and
pinning only feeds the preference section of the pre-prompt; neither touches
counts or associations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .agents import AgentRegistry
from .annotation import ParsedUtterance, SpanKind, normalize_keyword


class EntryKind(str, Enum):
    CRITERION = "criterion"
    OPTION = "option"


class UnknownKeyError(KeyError):
    pass


@dataclass
class IndexEntry:
    kind: EntryKind
    display: str
    count: int = 0
    mentioning_agents: list[str] = field(default_factory=list)
    co_keys: list[str] = field(default_factory=list)
    hidden: bool = False
    pinned: bool = False
    source_url: str | None = None

    def to_doc(self, key: str) -> dict:
        return {
            "key": key,
            "kind": self.kind.value,
            "display": self.display,
            "count": self.count,
            "mentioning_agents": list(self.mentioning_agents),
            "co_keys": list(self.co_keys),
            "hidden": self.hidden,
            "pinned": self.pinned,
            "source_url": self.source_url,
        }


class HistoryIndex:
    """Keyword registry, keyed by canonical form, insertion-ordered."""

    def __init__(self) -> None:
        self.entries: dict[str, IndexEntry] = {}

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, key: str) -> IndexEntry:
        try:
            return self.entries[key]
        except KeyError:
            raise UnknownKeyError(key) from None

    def keys_of_kind(self, kind: EntryKind) -> list[str]:
        return [k for k, e in self.entries.items() if e.kind is kind]

    def displays_of_kind(self, kind: EntryKind) -> list[str]:
        return [e.display for e in self.entries.values() if e.kind is kind]

    def to_doc(self) -> list[dict]:
        return [entry.to_doc(key) for key, entry in self.entries.items()]

    @classmethod
    def from_doc(cls, doc: list[dict]) -> "HistoryIndex":
        index = cls()
        for item in doc:
            index.entries[item["key"]] = IndexEntry(
                kind=EntryKind(item["kind"]),
                display=item["display"],
                count=item["count"],
                mentioning_agents=list(item["mentioning_agents"]),
                co_keys=list(item["co_keys"]),
                hidden=item["hidden"],
                pinned=item["pinned"],
                source_url=item.get("source_url"),
            )
        return index


_SPAN_KIND_TO_ENTRY = {
    SpanKind.CRITERION: EntryKind.CRITERION,
    SpanKind.OPTION: EntryKind.OPTION,
}


def _add_unique(items: list[str], value: str) -> None:
    if value not in items:
        items.append(value)


def update_index(
    index: HistoryIndex,
    turn_utterances: list[ParsedUtterance],
    registry: AgentRegistry,
) -> HistoryIndex:
    """Fold an accepted turn's utterances into the index.

    A keyword counts once per utterance that mentions it, however many times
    the utterance repeats the span. First-seen display text becomes the
    canonical display form. Keys co-occurring in one utterance become co_keys
    of each other.
    """
    for utterance in turn_utterances:
        keys_here: list[str] = []
        for span in utterance.spans:
            entry_kind = _SPAN_KIND_TO_ENTRY.get(span.kind)
            if entry_kind is None:
                continue
            key = span.canonical_key
            if key not in index.entries:
                index.entries[key] = IndexEntry(kind=entry_kind, display=span.display_text)
            _add_unique(keys_here, key)
        speaker = registry.by_name(utterance.speaker_name)
        for key in keys_here:
            entry = index.entries[key]
            entry.count += 1
            if speaker is not None:
                _add_unique(entry.mentioning_agents, speaker.agent_id)
            for other in keys_here:
                if other != key:
                    _add_unique(entry.co_keys, other)
    return index


@dataclass
class PreferenceSpace:
    pinned_agents: list[str] = field(default_factory=list)
    pinned_criteria: list[str] = field(default_factory=list)
    pinned_options: list[str] = field(default_factory=list)

    def bucket(self, kind: str) -> list[str]:
        try:
            return {
                "agent": self.pinned_agents,
                "criterion": self.pinned_criteria,
                "option": self.pinned_options,
            }[kind]
        except KeyError:
            raise ValueError(f"unknown pin kind {kind!r}") from None

    def total(self) -> int:
        return len(self.pinned_agents) + len(self.pinned_criteria) + len(self.pinned_options)

    def to_doc(self) -> dict:
        return {
            "pinned_agents": list(self.pinned_agents),
            "pinned_criteria": list(self.pinned_criteria),
            "pinned_options": list(self.pinned_options),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "PreferenceSpace":
        return cls(
            pinned_agents=list(doc["pinned_agents"]),
            pinned_criteria=list(doc["pinned_criteria"]),
            pinned_options=list(doc["pinned_options"]),
        )


def pin(
    space: PreferenceSpace,
    index: HistoryIndex,
    registry: AgentRegistry,
    kind: str,
    key: str,
) -> PreferenceSpace:
    """Add a known keyword or agent to the preference space (idempotent)."""
    key = normalize_keyword(key)
    if kind == "agent":
        if registry.by_name(key) is None:
            raise UnknownKeyError(key)
    else:
        entry = index.get(key)
        if entry.kind.value != kind:
            raise UnknownKeyError(key)
        entry.pinned = True
    _add_unique(space.bucket(kind), key)
    return space


def unpin(
    space: PreferenceSpace,
    index: HistoryIndex,
    kind: str,
    key: str,
) -> PreferenceSpace:
    """Remove a pin; unpinning something not pinned is a no-op."""
    key = normalize_keyword(key)
    bucket = space.bucket(kind)
    if key in bucket:
        bucket.remove(key)
    if kind != "agent" and key in index:
        index.get(key).pinned = False
    return space


def set_hidden(index: HistoryIndex, key: str, hidden: bool) -> HistoryIndex:
    """Flip presentation-only visibility; counts and pre-prompts unaffected."""
    index.get(normalize_keyword(key)).hidden = hidden
    return index


def associations(
    index: HistoryIndex,
    registry: AgentRegistry,
    key: str,
) -> dict[str, list[str]]:
    """Agents and keywords linked to a key, profile-derived links first.

    For a criterion, profile links are the chosen options of agents valuing
    it; for an option, the valued criteria of agents choosing it. Mentioning
    agents and co-occurring keys are unioned in after.
    """
    key = normalize_keyword(key)
    entry = index.get(key)
    if entry.kind is EntryKind.CRITERION:
        profile_agents = registry.agents_by_criterion(key)
        profile_keys: list[str] = []
        for agent_id in profile_agents:
            agent = registry.get(agent_id)
            if agent and agent.chosen_option:
                _add_unique(profile_keys, agent.chosen_option)
    else:
        profile_agents = registry.agents_by_option(key)
        profile_keys = []
        for agent_id in profile_agents:
            agent = registry.get(agent_id)
            if agent:
                for criterion in agent.valued_criteria:
                    _add_unique(profile_keys, criterion)

    agents = list(profile_agents)
    for agent_id in entry.mentioning_agents:
        _add_unique(agents, agent_id)
    related = [k for k in profile_keys if k in index]
    for co_key in entry.co_keys:
        _add_unique(related, co_key)
    return {"agents": agents, "related_keys": related}
