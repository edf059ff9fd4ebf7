// JSON schemas of the council HTTP API (see docs/http-api.md).

export type SpanKind = "criterion" | "option" | "agent_mention";

export type Span = {
  kind: SpanKind;
  display_text: string;
  canonical_key: string;
  start: number;
  end: number;
};

export type UtteranceView = {
  message_id: string;
  turn: number;
  speaker_agent_id: string | null;
  speaker_name: string;
  text: string;
  spans: Span[];
  current: boolean;
};

export type KeywordRef = { key: string; display: string };

export type AgentView = {
  agent_id: string;
  name: string;
  descriptor: string;
  valued_criteria: KeywordRef[];
  chosen_option: KeywordRef & { source_url: string | null };
  created_turn: number;
  appearance: { color: string; glyph: string };
  hidden: boolean;
};

export type IndexEntry = {
  key: string;
  kind: "criterion" | "option";
  display: string;
  count: number;
  mentioning_agents: string[];
  co_keys: string[];
  hidden: boolean;
  pinned: boolean;
  source_url: string | null;
};

export type PreferenceSpace = {
  pinned_agents: string[];
  pinned_criteria: string[];
  pinned_options: string[];
};

export type StateView = {
  session_id: string;
  created_at: number;
  turn_count: number;
  busy: boolean;
  current_utterances: UtteranceView[];
  agents: AgentView[];
  index: IndexEntry[];
  preference_space: PreferenceSpace;
  metrics: Record<string, number>;
};

export type ConstraintReport = {
  is_first_turn: boolean;
  new_agent_count: number;
  speaker_count: number;
  violations: string[];
};

export type TurnResultView = {
  turn: number;
  retries_used: number;
  utterances: UtteranceView[];
  new_agents: AgentView[];
  constraint_report: ConstraintReport;
  warnings: string[];
  index_delta: IndexEntry[];
};

export type TranscriptEntry = {
  type: "user" | "persona" | "context" | "pre_prompt";
  message_id?: string;
  turn: number;
  text: string;
  speaker_agent_id?: string | null;
  speaker_name?: string;
  spans?: Span[];
};

export type Associations = { agents: string[]; related_keys: string[] };

export type TurnKind = "chat" | "debate" | "invite_more";

export type MessageBody = {
  text: string;
  tagged_agent_ids: string[];
  preference_toggle: boolean;
  turn_kind: TurnKind;
};

export type PinKind = "agent" | "criterion" | "option";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}
