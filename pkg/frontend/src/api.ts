/**
 * Thin typed client for the chat service. Every method maps to exactly one
 * endpoint; errors carry the HTTP status and the service's `detail` string.
 */

import type {
  CreateSessionRequest,
  MessageRequest,
  ResponseBundle,
  SessionState,
  SkillInfo,
} from "./types.js";

/** status === 0 means the service was unreachable (network failure). */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(status === 0 ? `service unreachable: ${detail}` : `${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, err instanceof Error ? err.message : String(err));
  }
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

function post<T>(url: string, body: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

/** The service surface the app consumes; ApiClient is the HTTP implementation. */
export interface ChatService {
  createSession(body?: CreateSessionRequest): Promise<string>;
  sendMessage(sessionId: string, body: MessageRequest): Promise<ResponseBundle>;
  getSession(sessionId: string): Promise<SessionState>;
  getSkills(): Promise<SkillInfo[]>;
  getStyles(): Promise<string[]>;
}

export class ApiClient implements ChatService {
  private readonly baseUrl: string;

  /** @param baseUrl service origin, e.g. "" (same origin) or "http://127.0.0.1:8080" */
  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async createSession(body: CreateSessionRequest = {}): Promise<string> {
    const data = await post<{ id: string }>(`${this.baseUrl}/api/sessions`, body);
    return data.id;
  }

  sendMessage(sessionId: string, body: MessageRequest): Promise<ResponseBundle> {
    return post<ResponseBundle>(
      `${this.baseUrl}/api/sessions/${encodeURIComponent(sessionId)}/message`,
      body,
    );
  }

  getSession(sessionId: string): Promise<SessionState> {
    return request<SessionState>(
      `${this.baseUrl}/api/sessions/${encodeURIComponent(sessionId)}`,
    );
  }

  async getSkills(): Promise<SkillInfo[]> {
    const data = await request<{ skills: SkillInfo[] }>(`${this.baseUrl}/api/skills`);
    return data.skills;
  }

  async getStyles(): Promise<string[]> {
    const data = await request<{ styles: string[] }>(`${this.baseUrl}/api/styles`);
    return data.styles;
  }
}
