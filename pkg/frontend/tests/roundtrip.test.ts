// End-to-end round trip against the real study service: scripted volunteers
// complete assignments through the UI logic (anonymized slots, ranking draft,
// typed client), then the rendered results table must agree with the offline
// aggregator CLI to 2 decimal places.

import { spawn, execFileSync, ChildProcess } from "node:child_process";
import { mkdtempSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { StudyApi } from "../src/api.js";
import { assignSlots } from "../src/blind.js";
import { RankingDraft } from "../src/draft.js";
import { renderResultsTable } from "../src/results.js";
import { ResultsBody } from "../src/types.js";

const MODELS = ["model-a", "model-b", "model-c", "model-d"];
const ITEMS = ["v0", "v1"];
const DIMS = ["dynamics", "naturalness", "text_compliance", "overall"];
const PORT = 8900 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let workDir: string;
let storePath: string;
let configPath: string;

function writeStudyTree(): void {
  workDir = mkdtempSync(join(tmpdir(), "study-ui-"));
  const mediaRoot = join(workDir, "media");
  for (const m of MODELS) {
    for (const item of ITEMS) {
      const dir = join(mediaRoot, m, item);
      mkdirSync(dir, { recursive: true });
      writeFileSync(join(dir, "frame_00000.png"), Buffer.from([1, 2, 3]));
      writeFileSync(join(dir, "meta.json"), JSON.stringify({ count: 1, fps: 8 }));
    }
  }
  storePath = join(workDir, "store.jsonl");
  configPath = join(workDir, "study.json");
  writeFileSync(configPath, JSON.stringify({
    study_id: "s1",
    models: MODELS,
    items: ITEMS.map((i) => ({
      item_id: i,
      media: Object.fromEntries(MODELS.map((m) => [m, `${m}/${i}`])),
    })),
    dimensions: DIMS,
    n_volunteers_expected: 4,
    media_root: mediaRoot,
  }));
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/api/study/s1/results`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("study service did not come up");
}

beforeAll(async () => {
  writeStudyTree();
  server = spawn("python3", [
    "-m", "divebench.cli", "serve-study",
    "--config", configPath, "--port", String(PORT), "--store", storePath,
  ], { stdio: "ignore" });
  await waitForServer();
}, 30000);

afterAll(() => {
  server?.kill();
});

const nodeFetch = (url: string, init?: object) =>
  fetch(url, init as RequestInit).then((r) => ({
    status: r.status,
    ok: r.ok,
    json: () => r.json(),
  }));

/** One volunteer answers every assignment the service hands out. */
async function runVolunteer(volunteerId: string, seedMoves: number): Promise<number> {
  const api = new StudyApi("s1", BASE, nodeFetch);
  let answered = 0;
  for (let guard = 0; guard < 10; guard++) {
    const assignment = await api.getAssignment(volunteerId);
    if (assignment.done) break;
    const mapping = assignSlots(
      assignment.models!, assignment.media!, volunteerId, assignment.item_id!);
    const draft = new RankingDraft(assignment.dimensions!, mapping.slots);
    assignment.dimensions!.forEach((dim, di) => {
      if (dim === "text_compliance" && seedMoves % 2 === 0) {
        draft.toggleAbstain(dim); // exercise the abstention path
        return;
      }
      for (let k = 0; k < seedMoves + di; k++) {
        draft.move(dim, k % 4, (k + seedMoves) % 4);
      }
      draft.confirmOrder(dim);
    });
    expect(draft.isComplete()).toBe(true);
    for (const record of draft.toRecords(mapping, volunteerId, assignment.item_id!)) {
      await api.submitRanking(record);
    }
    answered++;
  }
  return answered;
}

describe("UI round trip against the live service", () => {
  it("volunteers complete assignments; results match the CLI aggregator", async () => {
    const answered = [
      await runVolunteer("vol-1", 1),
      await runVolunteer("vol-2", 2),
      await runVolunteer("vol-3", 3),
    ];
    expect(answered).toEqual([ITEMS.length, ITEMS.length, ITEMS.length]);

    // the server store gained one valid record per (volunteer, item, dimension)
    const lines = readFileSync(storePath, "utf8").trim().split("\n");
    expect(lines).toHaveLength(3 * ITEMS.length * DIMS.length);
    for (const line of lines) {
      const rec = JSON.parse(line);
      expect(DIMS).toContain(rec.dimension);
      if (!rec.abstain) {
        expect([...rec.ranking].sort()).toEqual([...MODELS].sort());
      }
    }

    const api = new StudyApi("s1", BASE, nodeFetch);
    const viaHttp = await api.getResults();

    const cliOut = execFileSync("python3", [
      "-m", "divebench.cli", "human-study", "aggregate",
      "--store", storePath, "--config", configPath,
    ], { encoding: "utf8" });
    const viaCli = JSON.parse(cliOut) as ResultsBody;

    const html = renderResultsTable(viaHttp);
    for (const dim of DIMS) {
      for (const model of MODELS) {
        const httpPct = viaHttp.dimensions[dim]!.normalized_pct[model]!;
        const cliPct = viaCli.dimensions[dim]!.normalized_pct[model]!;
        expect(httpPct.toFixed(2)).toBe(cliPct.toFixed(2));
      }
      const overallPct = viaHttp.dimensions["overall"]!.normalized_pct;
      for (const model of MODELS) {
        expect(html).toContain(`<td>${overallPct[model]!.toFixed(2)}</td>`);
      }
    }
  }, 60000);

  it("refreshing the results reflects new submissions", async () => {
    const api = new StudyApi("s1", BASE, nodeFetch);
    const before = await api.getResults();

    const volunteer = "vol-late";
    const assignment = await api.getAssignment(volunteer);
    expect(assignment.done).toBe(false);
    const mapping = assignSlots(
      assignment.models!, assignment.media!, volunteer, assignment.item_id!);
    const draft = new RankingDraft(assignment.dimensions!, mapping.slots);
    for (const dim of assignment.dimensions!) draft.confirmOrder(dim);
    for (const record of draft.toRecords(mapping, volunteer, assignment.item_id!)) {
      await api.submitRanking(record);
    }

    const after = await api.getResults();
    const item = assignment.item_id!;
    expect(after.dimensions["overall"]!.items[item]!.n_responses)
      .toBe(before.dimensions["overall"]!.items[item]!.n_responses + 1);
  }, 60000);

  it("duplicate submissions are rejected with 409", async () => {
    const api = new StudyApi("s1", BASE, nodeFetch);
    const record = {
      volunteer_id: "vol-1", item_id: "v0", dimension: "overall",
      ranking: MODELS, abstain: false, timestamp: 0,
    };
    await expect(api.submitRanking(record)).rejects.toMatchObject({ status: 409 });
  }, 60000);

  it("the service refuses what the UI cannot construct anyway", async () => {
    const api = new StudyApi("s1", BASE, nodeFetch);
    const record = {
      volunteer_id: "vol-x", item_id: "v0", dimension: "overall",
      ranking: ["model-a", "model-a", "model-b", "model-c"],
      abstain: false, timestamp: 0,
    };
    await expect(api.submitRanking(record)).rejects.toThrow(/permutation/);
  }, 60000);
});
