/** Typed client for the session service HTTP API. */

export interface ConceptCard {
  id: number;
  surface: string;
  snippet: string;
}

export interface SummaryCard {
  index: number;
  text: string;
  length: number;
}

export interface ConceptQuery {
  stage: "elicitation";
  round: number;
  budget_remaining: number;
  left: ConceptCard;
  right: ConceptCard;
}

export interface SummaryQuery {
  stage: "reward";
  round: number;
  budget_remaining: number;
  left: SummaryCard;
  right: SummaryCard;
}

export interface ExhaustedQuery {
  exhausted: true;
  stage: string;
}

export type QueryResponse = ConceptQuery | SummaryQuery | ExhaustedQuery;

export interface SummaryJson {
  sentence_ids: number[];
  text: string;
  length: number;
  score: number;
  redundancy: number;
}

export interface SessionState {
  session_id: string;
  stage: string;
  round: number;
  budget: number;
  reward_round: number;
  reward_budget: number;
  rating: number | null;
}

export interface EventRecord {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
  ts: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

async function parse<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const code = typeof body.code === "string" ? body.code : "unknown";
    const message =
      typeof body.message === "string" ? body.message : response.statusText;
    throw new ApiError(response.status, code, message);
  }
  return body as T;
}

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return parse<T>(response);
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    return parse<T>(response);
  }

  createSession(
    cluster: unknown,
    config: Record<string, unknown>,
    seed: number,
  ): Promise<{ session_id: string }> {
    return this.post("/sessions", { cluster, config, seed });
  }

  getQuery(sessionId: string): Promise<QueryResponse> {
    return this.get(`/sessions/${sessionId}/query`);
  }

  postFeedback(
    sessionId: string,
    left: number,
    right: number,
    label: 0 | 1,
  ): Promise<{ accepted: boolean; round: number; stage: string }> {
    return this.post(`/sessions/${sessionId}/feedback`, { left, right, label });
  }

  getSummary(sessionId: string, stage: "draft" | "final"): Promise<SummaryJson> {
    return this.get(`/sessions/${sessionId}/summary?stage=${stage}`);
  }

  postSummaryPreference(
    sessionId: string,
    left: number,
    right: number,
    label: 0 | 1,
  ): Promise<{ accepted: boolean; round: number; stage: string }> {
    return this.post(`/sessions/${sessionId}/summary-preference`, {
      left,
      right,
      label,
    });
  }

  postRating(sessionId: string, score: number): Promise<{ accepted: boolean }> {
    return this.post(`/sessions/${sessionId}/rating`, { score });
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.get(`/sessions/${sessionId}/state`);
  }

  getLog(sessionId: string): Promise<{ session_id: string; events: EventRecord[] }> {
    return this.get(`/sessions/${sessionId}/log`);
  }
}
