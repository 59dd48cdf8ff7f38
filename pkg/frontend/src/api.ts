// Thin typed client for the study service. fetch is injectable for tests.

import { Assignment, RankingRecord, ResultsBody, SequenceMeta } from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{
  status: number;
  ok: boolean;
  json(): Promise<unknown>;
}>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function detailOf(resp: { json(): Promise<unknown> }): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string };
    return body.detail ?? "request failed";
  } catch {
    return "request failed";
  }
}

export class StudyApi {
  constructor(
    private studyId: string,
    private baseUrl = "",
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  async getAssignment(volunteerId: string): Promise<Assignment> {
    const url = `${this.baseUrl}/api/study/${this.studyId}/assignment` +
      `?volunteer=${encodeURIComponent(volunteerId)}`;
    const resp = await this.fetchImpl(url);
    if (!resp.ok) throw new ApiError(resp.status, await detailOf(resp));
    return (await resp.json()) as Assignment;
  }

  async submitRanking(record: RankingRecord): Promise<void> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/study/${this.studyId}/response`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(record),
      },
    );
    if (resp.status === 409) throw new ApiError(409, "duplicate submission");
    if (!resp.ok) throw new ApiError(resp.status, await detailOf(resp));
  }

  async getResults(): Promise<ResultsBody> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/study/${this.studyId}/results`,
    );
    if (!resp.ok) throw new ApiError(resp.status, await detailOf(resp));
    return (await resp.json()) as ResultsBody;
  }

  /** Frame-sequence metadata next to the frames (count, fps). */
  async getSequenceMeta(mediaUrl: string): Promise<SequenceMeta> {
    const resp = await this.fetchImpl(`${mediaUrl}/meta.json`);
    if (!resp.ok) throw new ApiError(resp.status, await detailOf(resp));
    const raw = (await resp.json()) as Partial<SequenceMeta>;
    return { fps: raw.fps ?? 8, count: raw.count ?? 1, ...raw };
  }
}

export function frameUrl(mediaUrl: string, index: number): string {
  return `${mediaUrl}/frame_${String(index).padStart(5, "0")}.png`;
}
