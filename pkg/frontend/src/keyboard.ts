/**
 * Keyboard shortcuts for the review loop.
 *
 * Structural event/element types so the handler is testable without a
 * DOM; main.ts feeds it real KeyboardEvents.
 */

export interface KeyCommandTarget {
  approve(): unknown;
  reject(): unknown;
  skip(): unknown;
  back(): unknown;
}

export interface KeyEventLike {
  key: string;
  target: unknown;
  preventDefault(): void;
}

function isTypingTarget(target: unknown): boolean {
  const el = target as { tagName?: string; isContentEditable?: boolean } | null;
  if (!el) {
    return false;
  }
  if (el.isContentEditable === true) {
    return true;
  }
  return el.tagName === "INPUT" || el.tagName === "TEXTAREA" || el.tagName === "SELECT";
}

/** Dispatch one key press; returns whether it was handled. */
export function handleReviewKey(event: KeyEventLike, target: KeyCommandTarget): boolean {
  if (isTypingTarget(event.target)) {
    return false;
  }
  switch (event.key) {
    case "a":
    case "y":
      event.preventDefault();
      target.approve();
      return true;
    case "r":
    case "n":
      event.preventDefault();
      target.reject();
      return true;
    case "s":
      event.preventDefault();
      target.skip();
      return true;
    case "Escape":
      event.preventDefault();
      target.back();
      return true;
    default:
      return false;
  }
}

interface WindowLike {
  addEventListener(type: "keydown", listener: (event: KeyboardEvent) => void): void;
  removeEventListener(type: "keydown", listener: (event: KeyboardEvent) => void): void;
}

/** Bind the shortcuts to a window; returns the unbind function. */
export function bindKeys(win: WindowLike, target: KeyCommandTarget): () => void {
  const listener = (event: KeyboardEvent) => {
    handleReviewKey(event, target);
  };
  win.addEventListener("keydown", listener);
  return () => win.removeEventListener("keydown", listener);
}
