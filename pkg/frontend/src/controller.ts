/**
 * Session state machine.
 *
 * All view state is derived from API responses; the controller never
 * infers model state on its own.  One mutation may be in flight at a
 * time: while busy, further clicks are dropped, so a double-click can
 * produce only one feedback event.  A stale-pair conflict (409) silently
 * re-fetches the outstanding query; other failures surface as a
 * retryable banner.
 */

import {
  ApiError,
  ConceptQuery,
  QueryResponse,
  SessionApi,
  SummaryJson,
  SummaryQuery,
} from "./api.js";

export type Stage = "elicitation" | "reward" | "final";

export interface SessionView {
  sessionId: string;
  stage: Stage;
  round: number;
  budget: number;
  rewardRound: number;
  rewardBudget: number;
  conceptQuery: ConceptQuery | null;
  summaryQuery: SummaryQuery | null;
  draft: SummaryJson | null;
  final: SummaryJson | null;
  rating: number | null;
  busy: boolean;
  error: string | null;
}

type Listener = (view: SessionView) => void;

export class SessionController {
  private view: SessionView;
  private listeners: Listener[] = [];
  private lastAction: (() => Promise<void>) | null = null;

  private constructor(
    private readonly api: SessionApi,
    sessionId: string,
    budget: number,
    rewardBudget: number,
  ) {
    this.view = {
      sessionId,
      stage: "elicitation",
      round: 0,
      budget,
      rewardRound: 0,
      rewardBudget,
      conceptQuery: null,
      summaryQuery: null,
      draft: null,
      final: null,
      rating: null,
      busy: false,
      error: null,
    };
  }

  static async create(
    api: SessionApi,
    cluster: unknown,
    config: Record<string, unknown>,
    seed: number,
  ): Promise<SessionController> {
    const { session_id } = await api.createSession(cluster, config, seed);
    const state = await api.getState(session_id);
    const controller = new SessionController(
      api,
      session_id,
      state.budget,
      state.reward_budget,
    );
    await controller.refresh();
    return controller;
  }

  /** Rebuild the view for an existing session (browser refresh). */
  static async resume(api: SessionApi, sessionId: string): Promise<SessionController> {
    const state = await api.getState(sessionId);
    const controller = new SessionController(
      api,
      sessionId,
      state.budget,
      state.reward_budget,
    );
    controller.view.rating = state.rating;
    await controller.refresh();
    return controller;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.snapshot());
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  snapshot(): SessionView {
    return { ...this.view };
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const listener of this.listeners) {
      listener(snap);
    }
  }

  private setError(message: string, retry: () => Promise<void>): void {
    this.view.error = message;
    this.lastAction = retry;
    this.emit();
  }

  /** Re-run the action behind the error banner. */
  async retry(): Promise<void> {
    const action = this.lastAction;
    this.view.error = null;
    this.lastAction = null;
    this.emit();
    if (action) {
      await action();
    }
  }

  /** Pull the outstanding query (and panels) from the server. */
  async refresh(): Promise<void> {
    try {
      const state = await this.api.getState(this.view.sessionId);
      this.view.round = state.round;
      this.view.rewardRound = state.reward_round;
      this.view.rating = state.rating;
      const query = await this.api.getQuery(this.view.sessionId);
      this.applyQuery(query);
      if (this.view.stage !== "elicitation" || this.view.round > 0) {
        await this.loadPanels();
      }
      this.view.error = null;
    } catch (err) {
      this.setError(describe(err), () => this.refresh());
      return;
    }
    this.emit();
  }

  private applyQuery(query: QueryResponse): void {
    this.view.conceptQuery = null;
    this.view.summaryQuery = null;
    if ("exhausted" in query) {
      this.view.stage = query.stage === "reward" ? "reward" : "final";
      return;
    }
    if (query.stage === "elicitation") {
      this.view.stage = "elicitation";
      this.view.conceptQuery = query;
      this.view.round = query.round;
    } else {
      this.view.stage = "reward";
      this.view.summaryQuery = query;
      this.view.rewardRound = query.round;
    }
  }

  private async loadPanels(): Promise<void> {
    if (this.view.stage === "final") {
      this.view.final = await this.api.getSummary(this.view.sessionId, "final");
      return;
    }
    if (this.view.stage === "elicitation" && this.view.round === 0) {
      return;
    }
    try {
      this.view.draft = await this.api.getSummary(this.view.sessionId, "draft");
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) {
        throw err;
      }
    }
  }

  /** Answer the concept query: side is the card the user tapped. */
  async chooseConcept(side: "left" | "right"): Promise<void> {
    const query = this.view.conceptQuery;
    if (!query || this.view.busy) {
      return;
    }
    this.view.busy = true;
    this.emit();
    const label = side === "left" ? 1 : 0;
    try {
      await this.api.postFeedback(
        this.view.sessionId,
        query.left.id,
        query.right.id,
        label,
      );
      this.view.busy = false;
      await this.refresh();
    } catch (err) {
      this.view.busy = false;
      if (err instanceof ApiError && err.code === "conflict") {
        await this.refresh(); // stale pair: silently resync
        return;
      }
      this.setError(describe(err), () => this.chooseConcept(side));
    }
  }

  /** Answer the summary A/B query. */
  async chooseSummary(side: "left" | "right"): Promise<void> {
    const query = this.view.summaryQuery;
    if (!query || this.view.busy) {
      return;
    }
    this.view.busy = true;
    this.emit();
    const label = side === "left" ? 1 : 0;
    try {
      await this.api.postSummaryPreference(
        this.view.sessionId,
        query.left.index,
        query.right.index,
        label,
      );
      this.view.busy = false;
      await this.refresh();
    } catch (err) {
      this.view.busy = false;
      if (err instanceof ApiError && err.code === "conflict") {
        await this.refresh();
        return;
      }
      this.setError(describe(err), () => this.chooseSummary(side));
    }
  }

  async rate(score: number): Promise<void> {
    if (this.view.busy || this.view.rating !== null) {
      return;
    }
    this.view.busy = true;
    this.emit();
    try {
      await this.api.postRating(this.view.sessionId, score);
      this.view.rating = score;
      this.view.busy = false;
      this.view.error = null;
      this.emit();
    } catch (err) {
      this.view.busy = false;
      this.setError(describe(err), () => this.rate(score));
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}
