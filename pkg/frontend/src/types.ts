/**
 * Wire types for the approval service API.
 *
 * Field names are snake_case because payloads are used verbatim; the
 * service is the single source of truth and the client keeps no state
 * of record beyond what these carry.
 */

export type ItemKind = "bin_background" | "cluster_relevance";

export type DecisionValue = "approved" | "rejected";

/** dropped = removed from the queue because its parent bin was approved as background. */
export type ItemStatus = "pending" | "approved" | "rejected" | "dropped";

export interface SessionSummary {
  session_id: string;
  label: string;
  pending_count: number;
  total: number;
}

export interface ReviewItemPayload {
  item_id: string;
  kind: ItemKind;
  label: string;
  parent_bin_key: string;
  payload_id: string;
  member_region_ids: string[];
  collage_path: string;
  /** Service-relative URL of the collage PNG for this item. */
  collage_url: string;
  status: ItemStatus;
  decider: string | null;
  decided_at: number | null;
}

export interface DecisionRecord {
  item_id: string;
  kind: ItemKind;
  decision: DecisionValue;
  decider: string;
  timestamp: number;
}

/** POST .../decision reply: the updated item plus the log record and new queue size. */
export interface DecisionReply extends ReviewItemPayload {
  decision: DecisionRecord;
  pending_count: number;
}

/** The one question a reviewer answers for an item. */
export function promptFor(item: ReviewItemPayload): string {
  if (item.kind === "bin_background") {
    return "Is this bin a background?";
  }
  return `Is this cluster relevant to ${item.label}?`;
}
