/**
 * Controller: owns the state, talks to the service through ApiClient, and
 * re-renders the view after every transition. Exactly one message may be in
 * flight per session; the send control is disabled while awaiting.
 */

import { ApiClient, ApiError, type ChatService } from "./api.js";
import {
  applySendFailure,
  applySendSuccess,
  beginSend,
  initialState,
  rehydrate,
  withBootError,
  withRegistries,
  type ChatViewState,
} from "./state.js";
import { mount, render, type ViewRefs } from "./view.js";

export interface AppOptions {
  /** session to rehydrate on boot (e.g. from the ?session= URL parameter) */
  sessionId?: string | null;
  /** called after the URL should reflect a newly created session */
  onSessionCreated?(id: string): void;
}

export function sessionIdFromLocation(location: Pick<Location, "search">): string | null {
  return new URLSearchParams(location.search).get("session");
}

function errorMessage(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export class ChatApp {
  private state: ChatViewState = initialState();
  private readonly refs: ViewRefs;

  constructor(
    root: HTMLElement,
    private readonly client: ChatService,
    private readonly options: AppOptions = {},
  ) {
    this.refs = mount(root, {
      onDraftChange: (text) => this.setDraft(text),
      onSend: () => void this.send(),
      onRetry: () => void this.retry(),
      onStyleChange: (style) => this.setStyle(style),
      onPinChange: (skill) => this.setPin(skill),
    });
    render(this.refs, this.state);
  }

  getState(): Readonly<ChatViewState> {
    return this.state;
  }

  private update(state: ChatViewState): void {
    this.state = state;
    render(this.refs, this.state);
  }

  /** Load the skill and style registries; rehydrate the session if given. */
  async boot(): Promise<void> {
    try {
      const [skills, styles] = await Promise.all([
        this.client.getSkills(),
        this.client.getStyles(),
      ]);
      this.update(withRegistries(this.state, skills, styles));
    } catch (err) {
      this.update(withBootError(this.state, errorMessage(err)));
      return;
    }
    if (this.options.sessionId) {
      try {
        const session = await this.client.getSession(this.options.sessionId);
        this.update(rehydrate(this.state, session));
      } catch (err) {
        this.update({ ...this.state, error: errorMessage(err) });
      }
    }
  }

  setDraft(text: string): void {
    this.update({ ...this.state, draft: text });
  }

  setStyle(style: string | null): void {
    this.update({ ...this.state, selectedStyle: style });
  }

  setPin(skill: string | null): void {
    this.update({ ...this.state, pinnedSkill: skill });
  }

  /** Send `text` (default: the draft). No-op while a message is in flight. */
  async send(text?: string): Promise<void> {
    if (this.state.inFlight || this.state.bootError !== null) return;
    const message = (text ?? this.state.draft).trim();
    if (message === "") return;

    this.update(beginSend({ ...this.state, draft: message }));
    try {
      const sessionId = await this.ensureSession();
      const bundle = await this.client.sendMessage(sessionId, {
        text: message,
        ...(this.state.selectedStyle ? { style: this.state.selectedStyle } : {}),
        ...(this.state.pinnedSkill ? { pin_skill: this.state.pinnedSkill } : {}),
      });
      this.update(applySendSuccess(this.state, message, bundle));
    } catch (err) {
      this.update(applySendFailure(this.state, message, errorMessage(err)));
    }
  }

  /** Re-send the message whose delivery failed, preserving its text. */
  async retry(): Promise<void> {
    const failed = this.state.failedText;
    if (failed === null) return;
    await this.send(failed);
  }

  /** Create the session on first use and seed memory from the server. */
  private async ensureSession(): Promise<string> {
    if (this.state.sessionId) return this.state.sessionId;
    const id = await this.client.createSession(
      this.state.pinnedSkill ? { pin_skill: this.state.pinnedSkill } : {},
    );
    const session = await this.client.getSession(id);
    this.update(rehydrate(this.state, session));
    this.options.onSessionCreated?.(id);
    return id;
  }
}

export { ApiClient, ApiError, type ChatService };
