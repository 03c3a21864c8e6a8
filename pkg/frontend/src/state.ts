/**
 * View state and its pure transitions.
 *
 * The transcript entries received from the service are the single source of
 * truth for the message list: messages are derived by flattening them in
 * order, never reordered or edited client-side. Memory shown in the panel is
 * either the full memory from a session fetch or the result of mechanically
 * folding the `memory_delta` of each reply into the previous memory.
 */

import type {
  MemoryDelta,
  MemoryState,
  ResponseBundle,
  RetrievedKnowledge,
  SessionState,
  SkillInfo,
  TranscriptEntry,
} from "./types.js";

export interface ChatMessage {
  role: "user" | "assistant";
  text: string;
  /** assistant messages carry the bundle fields they were rendered from */
  skill?: string;
  style?: string | null;
  fallback?: boolean;
  retrieved?: RetrievedKnowledge | null;
  diagnostics?: string[];
}

export interface ChatViewState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  memory: MemoryState | null;
  skills: SkillInfo[];
  styles: string[];
  selectedStyle: string | null;
  /** skill pin sent with each message; session-level pin shows up here too */
  pinnedSkill: string | null;
  draft: string;
  inFlight: boolean;
  /** inline error text for the last failed action, null when healthy */
  error: string | null;
  /** the message text whose send failed; retry re-sends exactly this */
  failedText: string | null;
  /** set when the service could not be reached at boot; blocks the UI */
  bootError: string | null;
}

export function initialState(): ChatViewState {
  return {
    sessionId: null,
    transcript: [],
    memory: null,
    skills: [],
    styles: [],
    selectedStyle: null,
    pinnedSkill: null,
    draft: "",
    inFlight: false,
    error: null,
    failedText: null,
    bootError: null,
  };
}

export function withRegistries(
  state: ChatViewState,
  skills: SkillInfo[],
  styles: string[],
): ChatViewState {
  return { ...state, skills, styles, bootError: null };
}

export function withBootError(state: ChatViewState, message: string): ChatViewState {
  return { ...state, bootError: message };
}

/** Entering the in-flight phase; the draft stays until the send succeeds. */
export function beginSend(state: ChatViewState): ChatViewState {
  return { ...state, inFlight: true, error: null };
}

export function applySendSuccess(
  state: ChatViewState,
  userText: string,
  bundle: ResponseBundle,
): ChatViewState {
  const entry: TranscriptEntry = { user: userText, ...bundle };
  return {
    ...state,
    transcript: [...state.transcript, entry],
    memory: state.memory ? foldDelta(state.memory, bundle.memory_delta) : state.memory,
    draft: "",
    inFlight: false,
    error: null,
    failedText: null,
  };
}

export function applySendFailure(
  state: ChatViewState,
  userText: string,
  message: string,
): ChatViewState {
  return {
    ...state,
    inFlight: false,
    error: message,
    failedText: userText,
    draft: state.draft || userText,
  };
}

/** Replace local state with the server's view of the session. */
export function rehydrate(state: ChatViewState, session: SessionState): ChatViewState {
  return {
    ...state,
    sessionId: session.id,
    transcript: [...session.transcript],
    memory: session.memory,
    pinnedSkill: session.pinned_skill ?? state.pinnedSkill,
  };
}

/** Fold one reply's memory delta into the previous memory, exactly as sent. */
export function foldDelta(memory: MemoryState, delta: MemoryDelta): MemoryState {
  return {
    user_persona: [...memory.user_persona, ...delta.user_persona_added],
    assistant_persona: memory.assistant_persona,
    last_knowledge: delta.last_knowledge_changed
      ? delta.last_knowledge
      : memory.last_knowledge,
    last_query: delta.last_query_changed ? delta.last_query : memory.last_query,
  };
}

/** Flatten transcript entries into the message list, preserving order. */
export function messagesFromTranscript(transcript: TranscriptEntry[]): ChatMessage[] {
  const messages: ChatMessage[] = [];
  for (const entry of transcript) {
    messages.push({ role: "user", text: entry.user });
    messages.push({
      role: "assistant",
      text: entry.response,
      skill: entry.selected_skill,
      style: entry.style,
      fallback: entry.fallback,
      retrieved: entry.retrieved,
      diagnostics: entry.diagnostics,
    });
  }
  return messages;
}
