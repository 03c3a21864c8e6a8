/**
 * Wire types for the promptbot chat service.
 *
 * These mirror the JSON the service emits field-for-field; the UI performs
 * no inference of its own, so every rendered datum comes from one of these
 * shapes.
 */

/** One entry of the skill registry (GET /api/skills). */
export interface SkillInfo {
  id: string;
  kind: "generation" | "parse";
  template_id: string;
  knowledge_requirement: "none" | "wiki" | "search" | "kg" | "memory";
  paired_parser: string | null;
}

/** A piece of grounding knowledge: free text or a graph triple. */
export interface KnowledgeItem {
  kind: string;
  value: string | string[];
}

/** What a parser extracted from the conversation. */
export interface ParseResult {
  kind: string;
  payload: string | Record<string, string> | null;
  raw: string;
}

/** Knowledge fetched for the reply, with where it came from. */
export interface RetrievedKnowledge {
  source: "wiki" | "search" | "kg" | "memory";
  text: string;
  provenance: string;
}

/** How one exchange changed the session memory. */
export interface MemoryDelta {
  user_persona_added: string[];
  last_query: string | null;
  last_query_changed: boolean;
  last_knowledge: KnowledgeItem[];
  last_knowledge_changed: boolean;
}

/** Everything the service returns for one message. */
export interface ResponseBundle {
  response: string;
  selected_skill: string;
  style: string | null;
  scores: Record<string, number>;
  parse: ParseResult | null;
  retrieved: RetrievedKnowledge | null;
  memory_delta: MemoryDelta;
  diagnostics: string[];
  fallback: boolean;
}

/** One conversation turn as stored in the session history. */
export interface TurnState {
  speaker: "user" | "assistant";
  text: string;
  knowledge?: KnowledgeItem[];
  state_update?: Record<string, string>;
  query?: string;
  gold_path?: string[];
}

export interface DialogueState {
  id: string;
  task: string;
  turns: TurnState[];
}

export interface MemoryState {
  user_persona: string[];
  assistant_persona: string[];
  last_knowledge: KnowledgeItem[];
  last_query: string | null;
}

/** One transcript record: the user text plus the full reply bundle. */
export type TranscriptEntry = ResponseBundle & { user: string };

/** Full session as returned by GET /api/sessions/{id}. */
export interface SessionState {
  id: string;
  history: DialogueState;
  memory: MemoryState;
  pinned_skill: string | null;
  transcript: TranscriptEntry[];
}

export interface CreateSessionRequest {
  pin_skill?: string;
}

export interface MessageRequest {
  text: string;
  style?: string;
  pin_skill?: string;
}
