/**
 * Review loop controller, independent of the DOM.
 *
 * All state of record lives in the service: the controller only mirrors
 * the current queue head and counters, so reloading the page (or a
 * second reviewer elsewhere) resumes at the service's first pending
 * item. Decisions are posted synchronously; while one is in flight all
 * further commands are ignored, and a network failure retries the same
 * decision until the service answers 200 or 409, so no decision is ever
 * silently dropped.
 */

import { ApprovalApi } from "./api.js";
import type { DecisionValue, ReviewItemPayload, SessionSummary } from "./types.js";

export type ConnectionState = "ok" | "retrying";

export interface ReviewerState {
  sessions: SessionSummary[];
  activeSession: string | null;
  /** Queue head of the active session; null once the session is drained. */
  item: ReviewItemPayload | null;
  pendingCount: number;
  /** Items no longer pending: decided, plus clusters dropped by a background bin. */
  decidedCount: number;
  totalCount: number;
  /** Approvals recorded through this UI instance, across sessions. */
  approvalsThisVisit: number;
  connection: ConnectionState;
  busy: boolean;
}

export interface ReviewerOptions {
  decider?: string;
  retryDelayMs?: number;
  /** Injectable pause between retries so tests can run without waiting. */
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class Reviewer {
  private readonly decider: string;
  private readonly retryDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly state: ReviewerState = {
    sessions: [],
    activeSession: null,
    item: null,
    pendingCount: 0,
    decidedCount: 0,
    totalCount: 0,
    approvalsThisVisit: 0,
    connection: "ok",
    busy: false,
  };

  constructor(
    private readonly api: ApprovalApi,
    options: ReviewerOptions = {},
    private readonly onChange: () => void = () => {},
  ) {
    this.decider = options.decider ?? "human";
    this.retryDelayMs = options.retryDelayMs ?? 2000;
    this.sleep = options.sleep ?? defaultSleep;
  }

  getState(): Readonly<ReviewerState> {
    return this.state;
  }

  async start(): Promise<void> {
    this.state.sessions = await this.call(() => this.api.listSessions());
    this.notify();
  }

  async openSession(sessionId: string): Promise<void> {
    if (this.state.busy) {
      return;
    }
    this.state.busy = true;
    try {
      this.state.activeSession = sessionId;
      await this.refresh();
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  /** Leave the review view; the pending item stays pending on the service. */
  async backToSessions(): Promise<void> {
    if (this.state.busy) {
      return;
    }
    this.state.busy = true;
    try {
      this.state.activeSession = null;
      this.state.item = null;
      this.state.sessions = await this.call(() => this.api.listSessions());
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  approve(): Promise<void> {
    return this.decide("approved");
  }

  reject(): Promise<void> {
    return this.decide("rejected");
  }

  /**
   * Skip ahead without deciding. The service always serves its first
   * pending item, so a pending head can only be passed by deciding it;
   * skip therefore re-syncs with the service and, if the head is
   * unchanged, rotates to the next session that still has pending work.
   */
  async skip(): Promise<void> {
    if (this.state.busy || this.state.activeSession === null) {
      return;
    }
    this.state.busy = true;
    try {
      const before = this.state.item?.item_id ?? null;
      await this.refresh();
      const after = this.state.item?.item_id ?? null;
      if (after !== null && after === before) {
        const target = this.nextPendingSession();
        if (target !== null) {
          this.state.activeSession = target;
          await this.refresh();
        }
      }
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  private nextPendingSession(): string | null {
    const ids = this.state.sessions.map((s) => s.session_id);
    const start = ids.indexOf(this.state.activeSession ?? "");
    for (let step = 1; step <= ids.length; step++) {
      const candidate = this.state.sessions[(start + step) % ids.length];
      if (
        candidate !== undefined &&
        candidate.session_id !== this.state.activeSession &&
        candidate.pending_count > 0
      ) {
        return candidate.session_id;
      }
    }
    return null;
  }

  private async decide(decision: DecisionValue): Promise<void> {
    const item = this.state.item;
    const sessionId = this.state.activeSession;
    // Never decide a non-pending item; the service would 409 anyway.
    if (this.state.busy || item === null || sessionId === null) {
      return;
    }
    if (item.status !== "pending") {
      return;
    }
    this.state.busy = true;
    this.notify();
    try {
      const result = await this.call(() =>
        this.api.postDecision(sessionId, item.item_id, decision, this.decider),
      );
      if (result.outcome === "recorded") {
        if (decision === "approved") {
          this.state.approvalsThisVisit += 1;
        }
        this.state.pendingCount = result.reply.pending_count;
        this.state.decidedCount = this.state.totalCount - this.state.pendingCount;
      }
      // On conflict someone else decided it; either way show the new head.
      this.state.item =
        this.state.pendingCount > 0 || result.outcome === "conflict"
          ? await this.call(() => this.api.nextItem(sessionId))
          : null;
      if (result.outcome === "conflict") {
        await this.syncCounters(sessionId);
      }
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  /** Re-fetch the session list and the active session's queue head. */
  private async refresh(): Promise<void> {
    const sessionId = this.state.activeSession;
    this.state.sessions = await this.call(() => this.api.listSessions());
    if (sessionId === null) {
      this.notify();
      return;
    }
    this.state.item = await this.call(() => this.api.nextItem(sessionId));
    this.syncCountersFromList(sessionId);
    this.notify();
  }

  private async syncCounters(sessionId: string): Promise<void> {
    this.state.sessions = await this.call(() => this.api.listSessions());
    this.syncCountersFromList(sessionId);
  }

  private syncCountersFromList(sessionId: string): void {
    const summary = this.state.sessions.find((s) => s.session_id === sessionId);
    if (summary !== undefined) {
      this.state.pendingCount = summary.pending_count;
      this.state.totalCount = summary.total;
      this.state.decidedCount = summary.total - summary.pending_count;
    }
  }

  /** Run an API call, retrying while the service is unreachable. */
  private async call<T>(fn: () => Promise<T>): Promise<T> {
    for (;;) {
      try {
        const value = await fn();
        if (this.state.connection !== "ok") {
          this.state.connection = "ok";
          this.notify();
        }
        return value;
      } catch (error) {
        if (error instanceof Error && error.name === "ApiError") {
          throw error;
        }
        // fetch rejected: service unreachable. Keep the banner up and retry.
        if (this.state.connection !== "retrying") {
          this.state.connection = "retrying";
          this.notify();
        }
        await this.sleep(this.retryDelayMs);
      }
    }
  }

  private notify(): void {
    this.onChange();
  }
}
