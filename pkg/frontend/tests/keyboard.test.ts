/** Shortcut mapping and the typing guard. */

import { describe, expect, it } from "vitest";

import { bindKeys, handleReviewKey, type KeyCommandTarget } from "../src/keyboard.js";

function recorder(): { calls: string[]; target: KeyCommandTarget } {
  const calls: string[] = [];
  return {
    calls,
    target: {
      approve: () => calls.push("approve"),
      reject: () => calls.push("reject"),
      skip: () => calls.push("skip"),
      back: () => calls.push("back"),
    },
  };
}

function press(key: string, target: KeyCommandTarget, eventTarget: unknown = null): boolean {
  let prevented = false;
  const handled = handleReviewKey(
    { key, target: eventTarget, preventDefault: () => (prevented = true) },
    target,
  );
  expect(prevented).toBe(handled);
  return handled;
}

describe("handleReviewKey", () => {
  it("maps a/y to approve, r/n to reject, s to skip, Escape to back", () => {
    const { calls, target } = recorder();
    for (const key of ["a", "y", "r", "n", "s", "Escape"]) {
      expect(press(key, target)).toBe(true);
    }
    expect(calls).toEqual(["approve", "approve", "reject", "reject", "skip", "back"]);
  });

  it("leaves unknown keys alone", () => {
    const { calls, target } = recorder();
    for (const key of ["A", "q", "Enter", " ", "ArrowLeft"]) {
      expect(press(key, target)).toBe(false);
    }
    expect(calls).toEqual([]);
  });

  it("ignores keys typed into form fields", () => {
    const { calls, target } = recorder();
    expect(press("a", target, { tagName: "INPUT" })).toBe(false);
    expect(press("r", target, { tagName: "TEXTAREA" })).toBe(false);
    expect(press("s", target, { tagName: "SELECT" })).toBe(false);
    expect(press("a", target, { tagName: "DIV", isContentEditable: true })).toBe(false);
    expect(press("a", target, { tagName: "DIV" })).toBe(true);
    expect(calls).toEqual(["approve"]);
  });
});

describe("bindKeys", () => {
  it("attaches to keydown and detaches on unbind", () => {
    const { calls, target } = recorder();
    const listeners = new Set<(event: KeyboardEvent) => void>();
    const win = {
      addEventListener: (_: "keydown", fn: (event: KeyboardEvent) => void) => {
        listeners.add(fn);
      },
      removeEventListener: (_: "keydown", fn: (event: KeyboardEvent) => void) => {
        listeners.delete(fn);
      },
    };
    const unbind = bindKeys(win, target);
    expect(listeners.size).toBe(1);
    const fire = (key: string) =>
      listeners.forEach((fn) =>
        fn({ key, target: null, preventDefault: () => {} } as unknown as KeyboardEvent),
      );
    fire("a");
    expect(calls).toEqual(["approve"]);
    unbind();
    expect(listeners.size).toBe(0);
  });
});
