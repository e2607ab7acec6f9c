/**
 * DOM shell: renders ReviewerState into index.html and forwards clicks
 * and key presses to the controller. All review logic lives in
 * reviewer.ts; this file only paints.
 */

import { ApprovalApi } from "./api.js";
import { bindKeys } from "./keyboard.js";
import { Reviewer } from "./reviewer.js";
import { promptFor } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

// ?api=http://127.0.0.1:8765 points the client at a service on another
// origin (the service sends permissive CORS headers); default same-origin.
const base = new URLSearchParams(window.location.search).get("api") ?? "";
const api = new ApprovalApi(base);

const sessionView = el<HTMLElement>("session-view");
const sessionList = el<HTMLUListElement>("session-list");
const reviewView = el<HTMLElement>("review-view");
const sessionName = el<HTMLElement>("session-name");
const prompt = el<HTMLElement>("prompt");
const collage = el<HTMLImageElement>("collage");
const counters = el<HTMLElement>("counters");
const banner = el<HTMLElement>("banner");
const doneNote = el<HTMLElement>("done-note");
const buttons = {
  approve: el<HTMLButtonElement>("btn-approve"),
  reject: el<HTMLButtonElement>("btn-reject"),
  skip: el<HTMLButtonElement>("btn-skip"),
  back: el<HTMLButtonElement>("btn-back"),
};

function render(): void {
  const state = reviewer.getState();
  const reviewing = state.activeSession !== null;
  sessionView.hidden = reviewing;
  reviewView.hidden = !reviewing;
  banner.hidden = state.connection === "ok";

  if (!reviewing) {
    sessionList.replaceChildren(
      ...state.sessions.map((summary) => {
        const button = document.createElement("button");
        button.textContent =
          `${summary.label} - ${summary.pending_count} pending of ${summary.total}`;
        button.addEventListener("click", () => {
          void reviewer.openSession(summary.session_id);
        });
        const li = document.createElement("li");
        li.appendChild(button);
        return li;
      }),
    );
    return;
  }

  sessionName.textContent = state.activeSession;
  counters.textContent =
    `decided ${state.decidedCount} of ${state.totalCount}` +
    ` · pending ${state.pendingCount}` +
    ` · approvals this visit ${state.approvalsThisVisit}`;

  const item = state.item;
  doneNote.hidden = item !== null;
  collage.hidden = item === null;
  prompt.hidden = item === null;
  if (item !== null) {
    prompt.textContent = promptFor(item);
    const src = api.collageUrl(item);
    if (collage.getAttribute("src") !== src) {
      collage.setAttribute("src", src);
    }
  }
  const inputLocked = state.busy || item === null;
  buttons.approve.disabled = inputLocked;
  buttons.reject.disabled = inputLocked;
  buttons.skip.disabled = state.busy;
  buttons.back.disabled = state.busy;
}

const reviewer = new Reviewer(api, {}, render);

const commands = {
  approve: () => void reviewer.approve(),
  reject: () => void reviewer.reject(),
  skip: () => void reviewer.skip(),
  back: () => void reviewer.backToSessions(),
};

buttons.approve.addEventListener("click", commands.approve);
buttons.reject.addEventListener("click", commands.reject);
buttons.skip.addEventListener("click", commands.skip);
buttons.back.addEventListener("click", commands.back);
bindKeys(window, commands);

void reviewer.start().then(render);
