// Single-page wiring: fetch an assignment, show anonymized clips side by
// side, collect a drag-to-rank ordering (or abstention) per dimension, submit
// the de-anonymized records, repeat; plus a live results view.
//
// All durable state lives server-side: reloading loses at most the
// in-progress draft.

import { ApiError, StudyApi } from "./api.js";
import { assignSlots, SlotMapping } from "./blind.js";
import { RankingDraft } from "./draft.js";
import { FramePlayer } from "./player.js";
import { renderResultsTable } from "./results.js";
import { Assignment, guidanceFor } from "./types.js";

interface AppState {
  api: StudyApi;
  volunteerId: string;
  assignment: Assignment | null;
  mapping: SlotMapping | null;
  draft: RankingDraft | null;
  players: FramePlayer[];
  submitting: boolean;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function banner(message: string, kind = "error"): void {
  const box = document.getElementById("banner")!;
  box.className = kind;
  box.textContent = message;
  box.hidden = message === "";
}

function renderPanels(state: AppState, root: HTMLElement): void {
  const row = el("div", "panels");
  for (const slot of state.mapping!.slots) {
    const panel = el("div", "panel");
    panel.appendChild(el("h3", "slot-label", `Clip ${slot}`));
    const img = el("img", "clip");
    img.alt = `clip ${slot}`;
    panel.appendChild(img);
    row.appendChild(panel);
    const player = new FramePlayer(img, state.mapping!.slotToMedia[slot]!, state.api);
    state.players.push(player);
    player.load().catch(() => {
      img.alt = `clip ${slot} (failed to load)`;
    });
  }
  root.appendChild(row);
}

function renderBoard(state: AppState, dimension: string, root: HTMLElement): void {
  const draft = state.draft!;
  const board = el("div", "board");
  board.appendChild(el("h3", undefined, dimension.replace(/_/g, " ")));
  board.appendChild(el("p", "guidance", guidanceFor(dimension)));

  const list = el("ol", "rank-list");
  list.dataset.dimension = dimension;
  const abstained = draft.isAbstained(dimension);
  draft.order(dimension).forEach((slot, position) => {
    const li = el("li", "rank-entry");
    li.draggable = !abstained;
    li.dataset.slot = slot;
    li.appendChild(el("span", "rank-pos", `#${position + 1}`));
    li.appendChild(el("span", "rank-slot", `Clip ${slot}`));
    const up = el("button", "nudge", "▲");
    up.disabled = abstained || position === 0;
    up.addEventListener("click", () => {
      draft.move(dimension, position, position - 1);
      rerenderBoards(state);
    });
    const down = el("button", "nudge", "▼");
    down.disabled = abstained || position === draft.order(dimension).length - 1;
    down.addEventListener("click", () => {
      draft.move(dimension, position, position + 1);
      rerenderBoards(state);
    });
    li.appendChild(up);
    li.appendChild(down);

    li.addEventListener("dragstart", (ev) => {
      ev.dataTransfer?.setData("text/plain", slot);
    });
    li.addEventListener("dragover", (ev) => ev.preventDefault());
    li.addEventListener("drop", (ev) => {
      ev.preventDefault();
      const dragged = ev.dataTransfer?.getData("text/plain");
      if (dragged) {
        draft.moveSlot(dimension, dragged, position);
        rerenderBoards(state);
      }
    });
    list.appendChild(li);
  });
  if (abstained) list.classList.add("abstained");
  board.appendChild(list);

  const controls = el("div", "board-controls");
  const confirm = el("button", "confirm",
    abstained ? "abstained" : "confirm this order");
  confirm.disabled = abstained;
  confirm.addEventListener("click", () => {
    draft.confirmOrder(dimension);
    rerenderBoards(state);
  });
  const abstain = el("button", "abstain",
    abstained ? "undo abstain" : "abstain");
  abstain.addEventListener("click", () => {
    draft.toggleAbstain(dimension);
    rerenderBoards(state);
  });
  controls.appendChild(confirm);
  controls.appendChild(abstain);
  board.appendChild(controls);
  root.appendChild(board);
}

function rerenderBoards(state: AppState): void {
  const host = document.getElementById("boards")!;
  host.textContent = "";
  for (const dim of state.assignment!.dimensions!) {
    renderBoard(state, dim, host);
  }
  const submit = document.getElementById("submit") as HTMLButtonElement;
  submit.disabled = !state.draft!.isComplete() || state.submitting;
}

async function submitAll(state: AppState): Promise<void> {
  if (state.submitting) return; // one in-flight submission at a time
  state.submitting = true;
  banner("");
  try {
    const records = state.draft!.toRecords(
      state.mapping!, state.volunteerId, state.assignment!.item_id!);
    for (const record of records) {
      try {
        await state.api.submitRanking(record);
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          banner("already submitted; moving on", "notice");
          continue; // idempotent retry: duplicates are safe to skip
        }
        throw err;
      }
    }
    await nextAssignment(state);
  } catch (err) {
    banner(err instanceof ApiError ? `rejected: ${err.message}`
      : "network problem; your draft is untouched, retry submit");
  } finally {
    state.submitting = false;
    if (state.draft) rerenderBoards(state);
  }
}

async function nextAssignment(state: AppState): Promise<void> {
  for (const player of state.players) player.dispose();
  state.players = [];
  const stage = document.getElementById("stage")!;
  stage.textContent = "";

  let assignment: Assignment;
  try {
    assignment = await state.api.getAssignment(state.volunteerId);
  } catch {
    banner("cannot reach the study service; retrying in 3s");
    window.setTimeout(() => void nextAssignment(state), 3000);
    return;
  }
  state.assignment = assignment;
  if (assignment.done) {
    stage.appendChild(el("p", "done",
      "All items answered. Thank you! Check the results tab."));
    (document.getElementById("submit") as HTMLButtonElement).hidden = true;
    return;
  }
  state.mapping = assignSlots(
    assignment.models!, assignment.media!, state.volunteerId,
    assignment.item_id!);
  state.draft = new RankingDraft(assignment.dimensions!, state.mapping.slots);

  stage.appendChild(el("h2", undefined, `Item ${assignment.item_id}`));
  renderPanels(state, stage);
  const boards = el("div");
  boards.id = "boards";
  stage.appendChild(boards);
  const submit = el("button");
  submit.id = "submit";
  submit.textContent = "submit rankings";
  submit.addEventListener("click", () => void submitAll(state));
  stage.appendChild(submit);
  rerenderBoards(state);
}

async function showResults(state: AppState): Promise<void> {
  const host = document.getElementById("results")!;
  try {
    const results = await state.api.getResults();
    host.innerHTML = renderResultsTable(results);
  } catch {
    host.textContent = "results unavailable";
  }
}

export function startApp(studyId: string): void {
  const params = new URLSearchParams(window.location.search);
  let volunteer = params.get("volunteer") ?? "";
  if (!volunteer) {
    volunteer = window.prompt("volunteer id?") ?? "";
  }
  if (!volunteer) {
    banner("a volunteer id is required");
    return;
  }
  const state: AppState = {
    api: new StudyApi(studyId),
    volunteerId: volunteer,
    assignment: null,
    mapping: null,
    draft: null,
    players: [],
    submitting: false,
  };
  document.getElementById("refresh-results")!
    .addEventListener("click", () => void showResults(state));
  void nextAssignment(state);
  void showResults(state);
}

declare global {
  interface Window {
    startStudyApp: (studyId: string) => void;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.startStudyApp = startApp;
}
