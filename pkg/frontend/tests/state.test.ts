import { describe, expect, test } from "vitest";
import {
  applySendFailure,
  applySendSuccess,
  beginSend,
  foldDelta,
  initialState,
  messagesFromTranscript,
  rehydrate,
  withBootError,
  withRegistries,
} from "../src/state.js";
import type { MemoryState, ResponseBundle, SessionState } from "../src/types.js";

function bundle(overrides: Partial<ResponseBundle> = {}): ResponseBundle {
  return {
    response: "Hello!",
    selected_skill: "dd",
    style: null,
    scores: { dd: -1.0 },
    parse: null,
    retrieved: null,
    memory_delta: {
      user_persona_added: [],
      last_query: null,
      last_query_changed: false,
      last_knowledge: [],
      last_knowledge_changed: false,
    },
    diagnostics: [],
    fallback: false,
    ...overrides,
  };
}

const MEMORY: MemoryState = {
  user_persona: ["I love the color blue."],
  assistant_persona: ["I am a friendly assistant."],
  last_knowledge: [{ kind: "text", value: "old fact" }],
  last_query: "old query",
};

describe("message list", () => {
  test("mirrors the transcript order exactly", () => {
    const transcript = [
      { user: "Hi", ...bundle({ response: "Hello!" }) },
      {
        user: "Tell me about Paris",
        ...bundle({
          response: "It is in France.",
          selected_skill: "wow",
          style: "Curious",
          fallback: true,
          retrieved: { source: "wiki" as const, text: "Paris is in France.", provenance: "Paris" },
          diagnostics: ["wiki: no article for 'paris'"],
        }),
      },
    ];

    const messages = messagesFromTranscript(transcript);

    expect(messages.map((m) => [m.role, m.text])).toEqual([
      ["user", "Hi"],
      ["assistant", "Hello!"],
      ["user", "Tell me about Paris"],
      ["assistant", "It is in France."],
    ]);
    const last = messages[3]!;
    expect(last.skill).toBe("wow");
    expect(last.style).toBe("Curious");
    expect(last.fallback).toBe(true);
    expect(last.retrieved?.provenance).toBe("Paris");
    expect(last.diagnostics).toEqual(["wiki: no article for 'paris'"]);
  });
});

describe("send transitions", () => {
  test("beginSend marks in-flight and clears the previous error", () => {
    const state = beginSend({ ...initialState(), draft: "Hi", error: "old" });
    expect(state.inFlight).toBe(true);
    expect(state.error).toBeNull();
    expect(state.draft).toBe("Hi");
  });

  test("success appends the entry, folds memory, and clears the draft", () => {
    const start = { ...initialState(), memory: MEMORY, draft: "Hi", inFlight: true };
    const reply = bundle({
      memory_delta: {
        user_persona_added: ["I love painting landscapes."],
        last_query: "Eiffel Tower",
        last_query_changed: true,
        last_knowledge: [{ kind: "text", value: "new fact" }],
        last_knowledge_changed: true,
      },
    });

    const state = applySendSuccess(start, "Hi", reply);

    expect(state.transcript).toEqual([{ user: "Hi", ...reply }]);
    expect(state.memory).toEqual({
      user_persona: ["I love the color blue.", "I love painting landscapes."],
      assistant_persona: ["I am a friendly assistant."],
      last_knowledge: [{ kind: "text", value: "new fact" }],
      last_query: "Eiffel Tower",
    });
    expect(state.draft).toBe("");
    expect(state.inFlight).toBe(false);
    expect(state.failedText).toBeNull();
  });

  test("failure preserves the input and records what to retry", () => {
    const start = { ...initialState(), draft: "Hello there", inFlight: true };
    const state = applySendFailure(start, "Hello there", "502: backend failed");
    expect(state.inFlight).toBe(false);
    expect(state.error).toBe("502: backend failed");
    expect(state.failedText).toBe("Hello there");
    expect(state.draft).toBe("Hello there");
    expect(state.transcript).toEqual([]);
  });
});

describe("memory folding", () => {
  test("unchanged flags keep the previous values", () => {
    const folded = foldDelta(MEMORY, {
      user_persona_added: [],
      last_query: null,
      last_query_changed: false,
      last_knowledge: [],
      last_knowledge_changed: false,
    });
    expect(folded).toEqual(MEMORY);
  });

  test("a cleared query is applied when flagged as changed", () => {
    const folded = foldDelta(MEMORY, {
      user_persona_added: [],
      last_query: null,
      last_query_changed: true,
      last_knowledge: [],
      last_knowledge_changed: true,
    });
    expect(folded.last_query).toBeNull();
    expect(folded.last_knowledge).toEqual([]);
  });
});

describe("session rehydration", () => {
  test("replaces transcript, memory, and pin with the server view", () => {
    const session: SessionState = {
      id: "s1",
      history: { id: "s1", task: "chat", turns: [{ speaker: "user", text: "Hi" }] },
      memory: MEMORY,
      pinned_skill: "msc",
      transcript: [{ user: "Hi", ...bundle() }],
    };
    const state = rehydrate(initialState(), session);
    expect(state.sessionId).toBe("s1");
    expect(state.transcript).toEqual(session.transcript);
    expect(state.memory).toEqual(MEMORY);
    expect(state.pinnedSkill).toBe("msc");
  });
});

describe("boot transitions", () => {
  test("registries land and clear any boot error", () => {
    const skills = [
      { id: "dd", kind: "generation" as const, template_id: "dd", knowledge_requirement: "none" as const, paired_parser: null },
    ];
    const state = withRegistries(withBootError(initialState(), "down"), skills, ["Happy"]);
    expect(state.skills).toEqual(skills);
    expect(state.styles).toEqual(["Happy"]);
    expect(state.bootError).toBeNull();
  });
});
