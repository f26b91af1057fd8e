// Thin typed client over the session HTTP API. The UI never computes
// scores or weights itself; every user action maps to exactly one call.

import type {
  ExportRecord,
  JudgmentLevel,
  SearchResponse,
  SessionSnapshot,
  StatsResponse,
} from "./types.js";

declare global {
  interface Window {
    __QUERYFORGE_API__?: string;
  }
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

function baseUrl(): string {
  const configured =
    typeof window !== "undefined" ? window.__QUERYFORGE_API__ : undefined;
  return (configured ?? "").replace(/\/$/, "");
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${baseUrl()}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    const code = body?.error?.code ?? "http_error";
    const message = body?.error?.message ?? `request failed (${response.status})`;
    throw new ApiError(code, message, response.status);
  }
  return body as T;
}

export function createSession(
  taskNarrative: string,
  requestNarrative: string,
): Promise<SessionSnapshot> {
  return request("/api/sessions", {
    method: "POST",
    body: JSON.stringify({
      task_narrative: taskNarrative,
      request_narrative: requestNarrative,
    }),
  });
}

export function getSession(sessionId: string): Promise<SessionSnapshot> {
  return request(`/api/sessions/${encodeURIComponent(sessionId)}`);
}

export function search(
  sessionId: string,
  terms: string,
  k?: number,
): Promise<SearchResponse> {
  return request(`/api/sessions/${encodeURIComponent(sessionId)}/search`, {
    method: "POST",
    body: JSON.stringify({ terms, k }),
  });
}

export function judge(
  sessionId: string,
  sentenceId: string,
  level: JudgmentLevel,
): Promise<SessionSnapshot> {
  return request(`/api/sessions/${encodeURIComponent(sessionId)}/judgments`, {
    method: "POST",
    body: JSON.stringify({ sentence_id: sentenceId, level }),
  });
}

export function enrich(sessionId: string, k?: number): Promise<SearchResponse> {
  return request(`/api/sessions/${encodeURIComponent(sessionId)}/enrich`, {
    method: "POST",
    body: JSON.stringify({ k }),
  });
}

export function exportQuery(sessionId: string): Promise<ExportRecord> {
  return request(`/api/sessions/${encodeURIComponent(sessionId)}/export`, {
    method: "POST",
  });
}

export function sessionStats(sessionId: string): Promise<StatsResponse> {
  return request(`/api/sessions/${encodeURIComponent(sessionId)}/stats`);
}
