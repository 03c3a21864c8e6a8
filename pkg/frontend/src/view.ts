/**
 * DOM rendering. `mount` builds the static layout once and wires events;
 * `render` updates it from a ChatViewState. Every rendered datum comes
 * from a service response field carried in the state.
 */

import { messagesFromTranscript, type ChatViewState } from "./state.js";
import type { KnowledgeItem } from "./types.js";

export interface Handlers {
  onDraftChange(text: string): void;
  onSend(): void;
  onRetry(): void;
  onStyleChange(style: string | null): void;
  onPinChange(skill: string | null): void;
}

export interface ViewRefs {
  root: HTMLElement;
  bootError: HTMLElement;
  app: HTMLElement;
  sessionId: HTMLElement;
  messages: HTMLElement;
  memoryUserPersona: HTMLUListElement;
  memoryAssistantPersona: HTMLUListElement;
  memoryLastQuery: HTMLElement;
  memoryLastKnowledge: HTMLUListElement;
  stylePicker: HTMLSelectElement;
  pinPicker: HTMLSelectElement;
  errorBanner: HTMLElement;
  errorText: HTMLElement;
  retry: HTMLButtonElement;
  draft: HTMLInputElement;
  send: HTMLButtonElement;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  testId?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (testId) node.dataset["testid"] = testId;
  if (className) node.className = className;
  return node;
}

export function mount(root: HTMLElement, handlers: Handlers): ViewRefs {
  const doc = root.ownerDocument;
  root.textContent = "";

  const bootError = el(doc, "div", "boot-error", "boot-error");
  bootError.setAttribute("role", "alert");
  bootError.hidden = true;

  const app = el(doc, "div", "app", "app");

  const header = el(doc, "header", undefined, "header");
  const title = el(doc, "h1");
  title.textContent = "promptbot";
  const sessionId = el(doc, "span", "session-id", "session-id");
  header.append(title, sessionId);

  const main = el(doc, "main", undefined, "main");
  const messages = el(doc, "div", "messages", "messages");

  const memory = el(doc, "aside", "memory-panel", "memory");
  const memoryTitle = el(doc, "h2");
  memoryTitle.textContent = "Memory";
  const userPersonaTitle = el(doc, "h3");
  userPersonaTitle.textContent = "About you";
  const memoryUserPersona = el(doc, "ul", "memory-user-persona");
  const assistantPersonaTitle = el(doc, "h3");
  assistantPersonaTitle.textContent = "About the bot";
  const memoryAssistantPersona = el(doc, "ul", "memory-assistant-persona");
  const lastQueryTitle = el(doc, "h3");
  lastQueryTitle.textContent = "Last query";
  const memoryLastQuery = el(doc, "p", "memory-last-query");
  const lastKnowledgeTitle = el(doc, "h3");
  lastKnowledgeTitle.textContent = "Last knowledge";
  const memoryLastKnowledge = el(doc, "ul", "memory-last-knowledge");
  memory.append(
    memoryTitle,
    userPersonaTitle,
    memoryUserPersona,
    assistantPersonaTitle,
    memoryAssistantPersona,
    lastQueryTitle,
    memoryLastQuery,
    lastKnowledgeTitle,
    memoryLastKnowledge,
  );

  main.append(messages, memory);

  const errorBanner = el(doc, "div", "error-banner", "error-banner");
  errorBanner.setAttribute("role", "alert");
  errorBanner.hidden = true;
  const errorText = el(doc, "span", "error-text");
  const retry = el(doc, "button", "retry");
  retry.type = "button";
  retry.textContent = "Retry";
  retry.addEventListener("click", () => handlers.onRetry());
  errorBanner.append(errorText, retry);

  const controls = el(doc, "form", undefined, "controls");
  controls.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSend();
  });

  const stylePicker = el(doc, "select", "style-picker");
  stylePicker.addEventListener("change", () =>
    handlers.onStyleChange(stylePicker.value || null),
  );

  const pinPicker = el(doc, "select", "pin-picker");
  pinPicker.addEventListener("change", () =>
    handlers.onPinChange(pinPicker.value || null),
  );

  const draft = el(doc, "input", "draft");
  draft.type = "text";
  draft.placeholder = "Say something…";
  draft.addEventListener("input", () => handlers.onDraftChange(draft.value));

  const send = el(doc, "button", "send");
  send.type = "submit";
  send.textContent = "Send";

  controls.append(stylePicker, pinPicker, draft, send);
  app.append(header, main, errorBanner, controls);
  root.append(bootError, app);

  return {
    root,
    bootError,
    app,
    sessionId,
    messages,
    memoryUserPersona,
    memoryAssistantPersona,
    memoryLastQuery,
    memoryLastKnowledge,
    stylePicker,
    pinPicker,
    errorBanner,
    errorText,
    retry,
    draft,
    send,
  };
}

function renderKnowledgeItem(doc: Document, item: KnowledgeItem): HTMLLIElement {
  const li = doc.createElement("li");
  li.textContent = Array.isArray(item.value) ? item.value.join(" → ") : item.value;
  return li;
}

function fillList(list: HTMLUListElement, items: readonly HTMLLIElement[]): void {
  list.textContent = "";
  list.append(...items);
}

function renderMessages(refs: ViewRefs, state: ChatViewState): void {
  const doc = refs.root.ownerDocument;
  refs.messages.textContent = "";
  for (const message of messagesFromTranscript(state.transcript)) {
    const node = el(doc, "div", `msg-${message.role}`, `msg ${message.role}`);
    if (message.role === "assistant") {
      const badges = el(doc, "div", undefined, "badges");
      const skillBadge = el(doc, "span", "skill-badge", "badge skill");
      skillBadge.textContent = message.skill ?? "";
      badges.append(skillBadge);
      if (message.style) {
        const styleBadge = el(doc, "span", "style-badge", "badge style");
        styleBadge.textContent = message.style;
        badges.append(styleBadge);
      }
      if (message.fallback) {
        const fallbackNote = el(doc, "span", "fallback-note", "badge fallback");
        fallbackNote.textContent = "fallback";
        badges.append(fallbackNote);
      }
      node.append(badges);
    }
    const text = el(doc, "p", undefined, "text");
    text.textContent = message.text;
    node.append(text);
    if (message.role === "assistant" && message.retrieved) {
      const knowledge = el(doc, "div", "knowledge", "knowledge");
      const knowledgeText = el(doc, "p", "knowledge-text");
      knowledgeText.textContent = message.retrieved.text;
      const source = el(doc, "span", "knowledge-source", "source");
      source.textContent = message.retrieved.source;
      const provenance = el(doc, "span", "knowledge-provenance", "provenance");
      provenance.textContent = message.retrieved.provenance;
      knowledge.append(knowledgeText, source, provenance);
      node.append(knowledge);
    }
    if (message.role === "assistant" && message.diagnostics?.length) {
      const diagnostics = el(doc, "ul", "diagnostics", "diagnostics");
      for (const line of message.diagnostics) {
        const li = doc.createElement("li");
        li.textContent = line;
        diagnostics.append(li);
      }
      node.append(diagnostics);
    }
    refs.messages.append(node);
  }
}

function renderMemory(refs: ViewRefs, state: ChatViewState): void {
  const doc = refs.root.ownerDocument;
  const memory = state.memory;
  const toItems = (lines: readonly string[]) =>
    lines.map((line) => {
      const li = doc.createElement("li");
      li.textContent = line;
      return li;
    });
  fillList(refs.memoryUserPersona, memory ? toItems(memory.user_persona) : []);
  fillList(refs.memoryAssistantPersona, memory ? toItems(memory.assistant_persona) : []);
  refs.memoryLastQuery.textContent = memory?.last_query ?? "";
  fillList(
    refs.memoryLastKnowledge,
    memory ? memory.last_knowledge.map((item) => renderKnowledgeItem(doc, item)) : [],
  );
}

function renderPickers(refs: ViewRefs, state: ChatViewState): void {
  const doc = refs.root.ownerDocument;

  refs.stylePicker.hidden = state.styles.length === 0;
  refs.stylePicker.textContent = "";
  const noStyle = doc.createElement("option");
  noStyle.value = "";
  noStyle.textContent = "no style";
  refs.stylePicker.append(noStyle);
  for (const style of state.styles) {
    const option = doc.createElement("option");
    option.value = style;
    option.textContent = style;
    refs.stylePicker.append(option);
  }
  refs.stylePicker.value = state.selectedStyle ?? "";

  refs.pinPicker.textContent = "";
  const auto = doc.createElement("option");
  auto.value = "";
  auto.textContent = "auto skill";
  refs.pinPicker.append(auto);
  for (const skill of state.skills) {
    const option = doc.createElement("option");
    option.value = skill.id;
    option.textContent = skill.id;
    refs.pinPicker.append(option);
  }
  refs.pinPicker.value = state.pinnedSkill ?? "";
}

export function render(refs: ViewRefs, state: ChatViewState): void {
  refs.bootError.hidden = state.bootError === null;
  refs.bootError.textContent = state.bootError ?? "";
  refs.app.hidden = state.bootError !== null;

  refs.sessionId.textContent = state.sessionId ?? "new session";
  renderMessages(refs, state);
  renderMemory(refs, state);
  renderPickers(refs, state);

  refs.errorBanner.hidden = state.error === null;
  refs.errorText.textContent = state.error ?? "";
  refs.retry.hidden = state.failedText === null;

  if (refs.draft.value !== state.draft) refs.draft.value = state.draft;
  refs.draft.disabled = state.inFlight;
  refs.send.disabled = state.inFlight || state.draft.trim() === "";
}
