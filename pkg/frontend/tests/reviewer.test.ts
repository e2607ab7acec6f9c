/**
 * Review-loop behavior against the fake service: the scripted session,
 * the background-bin cascade, conflicts, outages, and resumption.
 */

import { describe, expect, it } from "vitest";

import { ApprovalApi } from "../src/api.js";
import { handleReviewKey } from "../src/keyboard.js";
import { Reviewer } from "../src/reviewer.js";
import type { DecisionValue } from "../src/types.js";
import { FakeApprovalServer, type FakeItemSpec } from "./fake_server.js";

function sunsetItems(): FakeItemSpec[] {
  const bin = (id: string, key: string): FakeItemSpec => ({
    itemId: id,
    kind: "bin_background",
    parentBinKey: key,
  });
  const cluster = (id: string, key: string): FakeItemSpec => ({
    itemId: id,
    kind: "cluster_relevance",
    parentBinKey: key,
  });
  return [
    bin("bin-000", "k0"),
    bin("bin-001", "k1"),
    bin("bin-002", "k2"),
    cluster("cl-000-00", "k0"),
    cluster("cl-000-01", "k0"),
    cluster("cl-000-02", "k0"),
    cluster("cl-001-00", "k1"),
    cluster("cl-001-01", "k1"),
    cluster("cl-002-00", "k2"),
    cluster("cl-002-01", "k2"),
    cluster("cl-002-02", "k2"),
    cluster("cl-002-03", "k2"),
  ];
}

interface Rig {
  server: FakeApprovalServer;
  reviewer: Reviewer;
  sleeps: number[];
  connections: string[];
  press: (key: string) => Promise<void>;
}

function makeRig(sessions?: Record<string, FakeItemSpec[]>): Rig {
  const server = new FakeApprovalServer(sessions ?? { sunset: sunsetItems() });
  const api = new ApprovalApi("", server.fetchFn);
  const sleeps: number[] = [];
  const connections: string[] = [];
  const reviewer: Reviewer = new Reviewer(
    api,
    {
      decider: "tester",
      sleep: async (ms) => {
        sleeps.push(ms);
      },
    },
    () => connections.push(reviewer.getState().connection),
  );
  // Key presses fire commands without awaiting, like a real handler; the
  // driver awaits the triggered command so scripts stay sequential.
  let inFlight: Promise<void> = Promise.resolve();
  const target = {
    approve: () => (inFlight = reviewer.approve()),
    reject: () => (inFlight = reviewer.reject()),
    skip: () => (inFlight = reviewer.skip()),
    back: () => (inFlight = reviewer.backToSessions()),
  };
  const press = async (key: string) => {
    handleReviewKey({ key, target: null, preventDefault: () => {} }, target);
    await inFlight;
  };
  return { server, reviewer, sleeps, connections, press };
}

describe("scripted review session", () => {
  // Queue order is bins first, then clusters; bin-001 is approved as
  // background, so cl-001-* never reach the reviewer.
  const script: Array<[string, string, DecisionValue]> = [
    ["bin-000", "r", "rejected"],
    ["bin-001", "a", "approved"],
    ["bin-002", "r", "rejected"],
    ["cl-000-00", "a", "approved"],
    ["cl-000-01", "a", "approved"],
    ["cl-000-02", "r", "rejected"],
    ["cl-002-00", "a", "approved"],
    ["cl-002-01", "r", "rejected"],
    ["cl-002-02", "a", "approved"],
    ["cl-002-03", "a", "approved"],
  ];

  it("decides ten items and the export replays them exactly", async () => {
    const { server, reviewer, press } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");

    const seen: string[] = [];
    for (const [expectedId, key] of script) {
      const item = reviewer.getState().item;
      expect(item).not.toBeNull();
      seen.push(item!.item_id);
      expect(item!.item_id).toBe(expectedId);
      await press(key);
    }

    const state = reviewer.getState();
    expect(state.item).toBeNull();
    expect(state.pendingCount).toBe(0);
    expect(state.decidedCount).toBe(12); // 10 decisions + 2 dropped clusters
    expect(state.approvalsThisVisit).toBe(6);
    expect(seen).toEqual(script.map(([id]) => id));

    const api = new ApprovalApi("", server.fetchFn);
    const exported = (await api.exportLog("sunset"))
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line) as { item_id: string; decision: string; decider: string });
    expect(exported.map((r) => [r.item_id, r.decision])).toEqual(
      script.map(([id, , decision]) => [id, decision]),
    );
    expect(exported.every((r) => r.decider === "tester")).toBe(true);
    expect(exported.some((r) => r.item_id.startsWith("cl-001"))).toBe(false);
  });

  it("timestamps in the export are strictly increasing", async () => {
    const { server, reviewer, press } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");
    for (const [, key] of script) {
      await press(key);
    }
    const stamps = server.orderedDecisions("sunset").map((r) => r.timestamp);
    for (let i = 1; i < stamps.length; i++) {
      expect(stamps[i]!).toBeGreaterThan(stamps[i - 1]!);
    }
  });
});

describe("background bins", () => {
  it("approving one removes its dependent clusters from the queue", async () => {
    const { server, reviewer, press } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");
    expect(reviewer.getState().pendingCount).toBe(12);

    await press("r"); // bin-000 stays reviewable
    expect(reviewer.getState().pendingCount).toBe(11);

    await press("a"); // bin-001 is background: itself + 2 clusters leave
    const state = reviewer.getState();
    expect(state.pendingCount).toBe(8);
    expect(state.item!.item_id).toBe("bin-002");
    expect(server.statusOf("sunset", "cl-001-00")).toBe("dropped");
    expect(server.statusOf("sunset", "cl-001-01")).toBe("dropped");
    expect(server.pendingIds("sunset")).not.toContain("cl-001-00");
  });
});

describe("conflicts and outages", () => {
  it("refreshes to the next pending item when the service says 409", async () => {
    const { server, reviewer } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");
    expect(reviewer.getState().item!.item_id).toBe("bin-000");

    server.decideDirectly("sunset", "bin-000", "rejected");
    await reviewer.approve();

    const state = reviewer.getState();
    expect(state.item!.item_id).toBe("bin-001");
    expect(state.approvalsThisVisit).toBe(0);
    expect(state.pendingCount).toBe(11);
    expect(server.orderedDecisions("sunset")).toHaveLength(1);
    expect(server.orderedDecisions("sunset")[0]!.decider).toBe("other-reviewer");
  });

  it("retries an unreachable service until the decision lands, exactly once", async () => {
    const { server, reviewer, sleeps, connections } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");

    server.failNextRequests = 3;
    await reviewer.approve();

    const log = server.orderedDecisions("sunset");
    expect(log).toHaveLength(1);
    expect(log[0]).toMatchObject({ item_id: "bin-000", decision: "approved" });
    expect(sleeps.length).toBeGreaterThanOrEqual(3);
    expect(connections).toContain("retrying");
    expect(reviewer.getState().connection).toBe("ok");
    expect(reviewer.getState().item!.item_id).toBe("bin-001");
  });

  it("ignores commands while a decision is in flight", async () => {
    const { server, reviewer } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");

    const first = reviewer.approve();
    void reviewer.reject(); // still busy: must be a no-op
    await first;

    expect(server.orderedDecisions("sunset").map((r) => r.decision)).toEqual(["approved"]);
    expect(reviewer.getState().item!.item_id).toBe("bin-001");
  });
});

describe("statelessness", () => {
  it("a fresh client resumes at the first pending item", async () => {
    const { server, reviewer, press } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");
    await press("r");
    await press("r");

    const second = new Reviewer(new ApprovalApi("", server.fetchFn));
    await second.start();
    await second.openSession("sunset");
    const state = second.getState();
    expect(state.item!.item_id).toBe("bin-002");
    expect(state.decidedCount).toBe(2);
    expect(state.pendingCount).toBe(10);
  });

  it("never posts a decision when nothing is pending", async () => {
    const only: FakeItemSpec[] = [
      { itemId: "bin-000", kind: "bin_background", parentBinKey: "k0" },
    ];
    const { server, reviewer } = makeRig({ lighthouse: only });
    await reviewer.start();
    await reviewer.openSession("lighthouse");
    await reviewer.approve();
    expect(reviewer.getState().item).toBeNull();

    const requestsBefore = server.requestCount;
    await reviewer.approve();
    await reviewer.reject();
    expect(server.requestCount).toBe(requestsBefore);
    expect(server.orderedDecisions("lighthouse")).toHaveLength(1);
  });
});

describe("skip", () => {
  it("rotates to the next session with pending work, recording nothing", async () => {
    const bin = (id: string): FakeItemSpec => ({
      itemId: id,
      kind: "bin_background",
      parentBinKey: "k",
    });
    const { server, reviewer, press } = makeRig({
      beach: [bin("b-0")],
      sunset: [bin("s-0"), bin("s-1")],
    });
    await reviewer.start();
    await reviewer.openSession("beach");
    expect(reviewer.getState().item!.item_id).toBe("b-0");

    await press("s");
    expect(reviewer.getState().activeSession).toBe("sunset");
    expect(reviewer.getState().item!.item_id).toBe("s-0");

    await press("s"); // back around
    expect(reviewer.getState().activeSession).toBe("beach");
    expect(server.orderedDecisions("beach")).toHaveLength(0);
    expect(server.orderedDecisions("sunset")).toHaveLength(0);
  });

  it("stays put when no other session has pending items", async () => {
    const { reviewer, press } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");
    await press("s");
    expect(reviewer.getState().activeSession).toBe("sunset");
    expect(reviewer.getState().item!.item_id).toBe("bin-000");
  });

  it("lands on the new head when the old one was decided elsewhere", async () => {
    const { server, reviewer, press } = makeRig();
    await reviewer.start();
    await reviewer.openSession("sunset");
    server.decideDirectly("sunset", "bin-000", "rejected");
    await press("s");
    expect(reviewer.getState().activeSession).toBe("sunset");
    expect(reviewer.getState().item!.item_id).toBe("bin-001");
  });
});
