"""System-prompt assembly from the on-disk template catalog.

Each section of the identity prompt lives in its own plain-text file under
``council/prompts/``; editing a file changes the assembled prompt
byte-for-byte. Section order is fixed by the manifest below.
"""

from __future__ import annotations

from importlib import resources

#: Catalog manifest, in assembly order.
SECTION_FILES = [
    "01_context_identity.txt",
    "02_goal.txt",
    "03_persona_details.txt",
    "04_keyword_identification.txt",
    "05_saturation.txt",
    "06_message_verbosity.txt",
    "07_persona_behavior.txt",
    "08_inviting_more_personas.txt",
    "09_conversation_detection.txt",
    "10_conversation_behavior.txt",
    "11_first_message.txt",
    "12_factuality.txt",
    "13_annotation_format.txt",
]


class PromptCatalogError(Exception):
    pass


def load_section(filename: str) -> str:
    ref = resources.files("council").joinpath("prompts", filename)
    try:
        return ref.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise PromptCatalogError(f"missing prompt template {filename!r}") from exc


def build_system_prompt(domain_hint: str | None = None) -> str:
    """Concatenate every catalog section; optionally append a domain hint."""
    sections = [load_section(name).rstrip("\n") for name in SECTION_FILES]
    prompt = "\n\n".join(sections)
    if domain_hint:
        prompt += f"\n\nThe decision domain is: {domain_hint}"
    return prompt
