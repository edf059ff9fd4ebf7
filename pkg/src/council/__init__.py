"""Multi-persona conversational decision support.

One completion stream carries a panel of opinionated personas; the parser
splits it into annotated utterances, the engine validates and commits turns,
grounding attaches web context to options, and the HTTP service exposes the
whole loop to clients.
"""

from .annotation import (
    AnnotationSpan,
    Diagnostic,
    DiagnosticCode,
    ParsedUtterance,
    Severity,
    SpanKind,
    UtteranceBlock,
    normalize_keyword,
    parse_completion,
    parse_utterance,
    render_utterance,
    split_utterances,
)
from .agents import (
    AgentProfile,
    AgentRegistry,
    IntroRejected,
    RegistrationError,
    TurnConstraintReport,
    TurnViolation,
    extract_profile,
    validate_turn,
)
from .engine import (
    PrePrompt,
    TurnKind,
    TurnResult,
    UserTurnInput,
    assemble_request,
    build_pre_prompt,
    process_turn,
    trigger_debate,
)
from .index import HistoryIndex, PreferenceSpace, associations, pin, set_hidden, unpin, update_index
from .prompt_catalog import build_system_prompt
from .providers import ChatMessage, ChatProviderRequest, ScriptedProvider
from .session import Session, SessionConfig
from .store import export_metrics, load, serialize

__all__ = [
    "AgentProfile",
    "AgentRegistry",
    "AnnotationSpan",
    "ChatMessage",
    "ChatProviderRequest",
    "Diagnostic",
    "DiagnosticCode",
    "HistoryIndex",
    "IntroRejected",
    "ParsedUtterance",
    "PrePrompt",
    "PreferenceSpace",
    "RegistrationError",
    "ScriptedProvider",
    "Session",
    "SessionConfig",
    "Severity",
    "SpanKind",
    "TurnConstraintReport",
    "TurnKind",
    "TurnResult",
    "TurnViolation",
    "UserTurnInput",
    "UtteranceBlock",
    "assemble_request",
    "associations",
    "build_pre_prompt",
    "build_system_prompt",
    "export_metrics",
    "extract_profile",
    "load",
    "normalize_keyword",
    "parse_completion",
    "parse_utterance",
    "pin",
    "process_turn",
    "render_utterance",
    "serialize",
    "set_hidden",
    "split_utterances",
    "trigger_debate",
    "unpin",
    "update_index",
    "validate_turn",
]
