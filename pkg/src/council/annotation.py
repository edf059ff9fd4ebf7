"""Wire grammar for multi-persona completions.

A completion carries several persona utterances in one string. Each utterance
starts with a speaker header ``@{Name}(opinion): ``, may embed annotation
spans (``%{...}`` criterion, ``&{...}`` option, ``@{...}`` agent mention), and
ends with the terminator ``%%%``. The full grammar is documented in
docs/grammar.md; this module is the reference implementation.

Parsing is total: malformed input degrades into diagnostics and literal text,
never exceptions. ``render_utterance`` is the exact inverse of
``parse_utterance`` for conformant input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

TERMINATOR = "%%%"

#: Sigil character -> span kind for the three meaningful annotation kinds.
SIGILS = {"%": "criterion", "&": "option", "@": "agent_mention"}

#: Sigils the grammar reserves but assigns no meaning; kept as literal text.
RESERVED_SIGILS = frozenset("+")

#: Advisory per-utterance word budget; exceeding it is a warning, never an error.
WORD_LIMIT = 160

_HEADER_RE = re.compile(r"^@\{([^{}]+)\}\(([^()]*)\): ?")


class SpanKind(str, Enum):
    CRITERION = "criterion"
    OPTION = "option"
    AGENT_MENTION = "agent_mention"


_KIND_TO_SIGIL = {
    SpanKind.CRITERION: "%",
    SpanKind.OPTION: "&",
    SpanKind.AGENT_MENTION: "@",
}


class Severity(str, Enum):
    WARNING = "warning"
    ERROR = "error"


class DiagnosticCode(str, Enum):
    MISSING_HEADER = "missing_header"
    UNBALANCED_BRACES = "unbalanced_braces"
    UNKNOWN_SIGIL = "unknown_sigil"
    MISSING_TERMINATOR = "missing_terminator"
    EMPTY_UTTERANCE = "empty_utterance"
    OVER_WORD_LIMIT = "over_word_limit"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: DiagnosticCode
    ordinal: int
    detail: str


@dataclass(frozen=True)
class UtteranceBlock:
    """One persona's segment of a completion, terminator stripped."""

    raw_text: str
    ordinal: int


@dataclass(frozen=True)
class AnnotationSpan:
    kind: SpanKind
    display_text: str
    canonical_key: str
    start: int
    end: int


@dataclass
class ParsedUtterance:
    speaker_name: str
    role_tag: str
    plain_text: str
    spans: list[AnnotationSpan] = field(default_factory=list)

    def criteria(self) -> list[AnnotationSpan]:
        return [s for s in self.spans if s.kind is SpanKind.CRITERION]

    def options(self) -> list[AnnotationSpan]:
        return [s for s in self.spans if s.kind is SpanKind.OPTION]

    def mentions(self) -> list[AnnotationSpan]:
        return [s for s in self.spans if s.kind is SpanKind.AGENT_MENTION]

    def word_count(self) -> int:
        return len(self.plain_text.split())


def normalize_keyword(display_text: str) -> str:
    """Canonical identity of a keyword: trimmed, single-spaced, case-folded.

    Idempotent; raises ValueError if nothing remains after trimming. Spelling
    variants beyond case/whitespace are intentionally NOT merged.
    """
    key = " ".join(display_text.split()).casefold()
    if not key:
        raise ValueError("keyword is empty after normalization")
    return key


def split_utterances(completion: str) -> tuple[list[UtteranceBlock], list[Diagnostic]]:
    """Cut a raw completion into per-persona blocks at each terminator.

    Whitespace-only segments are dropped. Non-blank text after the final
    terminator (or a completion with no terminator at all) still yields a
    block, flagged with a missing_terminator warning.
    """
    blocks: list[UtteranceBlock] = []
    diagnostics: list[Diagnostic] = []
    segments = completion.split(TERMINATOR)
    for index, segment in enumerate(segments):
        text = segment.strip()
        if not text:
            continue
        ordinal = len(blocks)
        blocks.append(UtteranceBlock(raw_text=text, ordinal=ordinal))
        if index == len(segments) - 1:
            diagnostics.append(
                Diagnostic(
                    severity=Severity.WARNING,
                    code=DiagnosticCode.MISSING_TERMINATOR,
                    ordinal=ordinal,
                    detail="text after the final terminator kept as an utterance",
                )
            )
    return blocks, diagnostics


def parse_utterance(
    block: UtteranceBlock,
) -> tuple[ParsedUtterance | None, list[Diagnostic]]:
    """Parse one block into a speaker, plain text, and annotation spans.

    Error-severity diagnostics mean no utterance was produced. Malformed
    annotations (orphan sigils, empty or brace-containing bodies) stay in the
    plain text verbatim with a warning, so degraded output is displayed
    rather than dropped.
    """
    diagnostics: list[Diagnostic] = []
    match = _HEADER_RE.match(block.raw_text)
    if match is None:
        diagnostics.append(
            Diagnostic(
                severity=Severity.ERROR,
                code=DiagnosticCode.MISSING_HEADER,
                ordinal=block.ordinal,
                detail="utterance does not start with @{Name}(role): ",
            )
        )
        return None, diagnostics

    speaker_name = match.group(1)
    role_tag = match.group(2)
    if speaker_name.strip().casefold() == "user":
        diagnostics.append(
            Diagnostic(
                severity=Severity.ERROR,
                code=DiagnosticCode.MISSING_HEADER,
                ordinal=block.ordinal,
                detail="speaker name 'user' is reserved",
            )
        )
        return None, diagnostics

    body = block.raw_text[match.end() :]
    if not body.strip():
        diagnostics.append(
            Diagnostic(
                severity=Severity.ERROR,
                code=DiagnosticCode.EMPTY_UTTERANCE,
                ordinal=block.ordinal,
                detail=f"speaker {speaker_name!r} said nothing",
            )
        )
        return None, diagnostics

    plain_parts: list[str] = []
    spans: list[AnnotationSpan] = []
    plain_len = 0
    i = 0
    while i < len(body):
        ch = body[i]
        if (ch in SIGILS or ch in RESERVED_SIGILS) and body.startswith("{", i + 1):
            close = body.find("}", i + 2)
            inner = body[i + 2 : close] if close != -1 else ""
            if close == -1:
                diagnostics.append(
                    Diagnostic(
                        severity=Severity.WARNING,
                        code=DiagnosticCode.UNBALANCED_BRACES,
                        ordinal=block.ordinal,
                        detail=f"'{ch}{{' never closed; kept literally",
                    )
                )
                plain_parts.append(ch)
                plain_len += 1
                i += 1
                continue
            if not inner or "{" in inner:
                diagnostics.append(
                    Diagnostic(
                        severity=Severity.WARNING,
                        code=DiagnosticCode.UNBALANCED_BRACES,
                        ordinal=block.ordinal,
                        detail=f"malformed annotation body {inner!r}; kept literally",
                    )
                )
                plain_parts.append(ch)
                plain_len += 1
                i += 1
                continue
            if ch in RESERVED_SIGILS:
                literal = body[i : close + 1]
                diagnostics.append(
                    Diagnostic(
                        severity=Severity.WARNING,
                        code=DiagnosticCode.UNKNOWN_SIGIL,
                        ordinal=block.ordinal,
                        detail=f"sigil {ch!r} has no defined meaning; kept literally",
                    )
                )
                plain_parts.append(literal)
                plain_len += len(literal)
                i = close + 1
                continue
            spans.append(
                AnnotationSpan(
                    kind=SpanKind(SIGILS[ch]),
                    display_text=inner,
                    canonical_key=normalize_keyword(inner),
                    start=plain_len,
                    end=plain_len + len(inner),
                )
            )
            plain_parts.append(inner)
            plain_len += len(inner)
            i = close + 1
        else:
            plain_parts.append(ch)
            plain_len += 1
            i += 1

    utterance = ParsedUtterance(
        speaker_name=speaker_name,
        role_tag=role_tag,
        plain_text="".join(plain_parts),
        spans=spans,
    )
    if utterance.word_count() > WORD_LIMIT:
        diagnostics.append(
            Diagnostic(
                severity=Severity.WARNING,
                code=DiagnosticCode.OVER_WORD_LIMIT,
                ordinal=block.ordinal,
                detail=f"{utterance.word_count()} words exceeds the {WORD_LIMIT}-word budget",
            )
        )
    return utterance, diagnostics


def parse_completion(
    completion: str,
) -> tuple[list[ParsedUtterance], list[Diagnostic]]:
    """Split and parse a whole completion; convenience over the two stages."""
    blocks, diagnostics = split_utterances(completion)
    utterances: list[ParsedUtterance] = []
    for block in blocks:
        utterance, block_diags = parse_utterance(block)
        diagnostics.extend(block_diags)
        if utterance is not None:
            utterances.append(utterance)
    return utterances, diagnostics


def render_utterance(utterance: ParsedUtterance) -> str:
    """Serialize back to wire form: header, sigil-wrapped spans, terminator.

    Inverse of parse_utterance: for any block with a conformant header,
    render_utterance(parse) reproduces the block byte-exactly (plus the
    terminator the splitter removed). Raises ValueError on spans that
    overlap, fall outside the text, or disagree with it.
    """
    plain = utterance.plain_text
    cursor = 0
    pieces = [f"@{{{utterance.speaker_name}}}({utterance.role_tag}): "]
    previous_end = 0
    for span in sorted(utterance.spans, key=lambda s: s.start):
        if span.start < previous_end:
            raise ValueError(f"overlapping span at {span.start}")
        if not (0 <= span.start < span.end <= len(plain)):
            raise ValueError(f"span [{span.start}, {span.end}) outside text")
        if plain[span.start : span.end] != span.display_text:
            raise ValueError(f"span text mismatch at {span.start}")
        if "{" in span.display_text or "}" in span.display_text:
            raise ValueError("span display text may not contain braces")
        pieces.append(plain[cursor : span.start])
        pieces.append(f"{_KIND_TO_SIGIL[span.kind]}{{{span.display_text}}}")
        cursor = span.end
        previous_end = span.end
    pieces.append(plain[cursor:])
    pieces.append(TERMINATOR)
    return "".join(pieces)
