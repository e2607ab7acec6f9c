/**
 * Typed client for the approval service.
 *
 * Maps HTTP outcomes the UI must react to (404 queue empty, 409 already
 * decided) onto return values; anything else surfaces as ApiError.
 * Network-level failures reject with whatever fetch threw, so callers
 * can tell "service said no" from "service unreachable".
 */

import type {
  DecisionReply,
  DecisionValue,
  ReviewItemPayload,
  SessionSummary,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(`service replied ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type PostOutcome =
  | { outcome: "recorded"; reply: DecisionReply }
  | { outcome: "conflict" };

async function detailOf(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: unknown };
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
  } catch {
    return res.statusText;
  }
}

export class ApprovalApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async listSessions(): Promise<SessionSummary[]> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions`);
    if (!res.ok) {
      throw new ApiError(res.status, await detailOf(res));
    }
    return (await res.json()) as SessionSummary[];
  }

  /** First pending item of the session, or null when nothing is left to review. */
  async nextItem(sessionId: string): Promise<ReviewItemPayload | null> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/next`);
    if (res.status === 404) {
      return null;
    }
    if (!res.ok) {
      throw new ApiError(res.status, await detailOf(res));
    }
    return (await res.json()) as ReviewItemPayload;
  }

  collageUrl(item: ReviewItemPayload): string {
    return `${this.baseUrl}${item.collage_url}`;
  }

  async postDecision(
    sessionId: string,
    itemId: string,
    decision: DecisionValue,
    decider: string,
  ): Promise<PostOutcome> {
    const res = await this.fetchFn(
      `${this.baseUrl}/sessions/${sessionId}/items/${itemId}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ decision, decider }),
      },
    );
    if (res.status === 409) {
      return { outcome: "conflict" };
    }
    if (!res.ok) {
      throw new ApiError(res.status, await detailOf(res));
    }
    return { outcome: "recorded", reply: (await res.json()) as DecisionReply };
  }

  /** Raw NDJSON decision log, one record per line in decision order. */
  async exportLog(sessionId: string): Promise<string> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/export`);
    if (!res.ok) {
      throw new ApiError(res.status, await detailOf(res));
    }
    return await res.text();
  }
}
