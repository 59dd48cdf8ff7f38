// Shared payload types for the study service API.

export interface Assignment {
  done: boolean;
  item_id?: string;
  dimensions?: string[];
  models?: string[];
  media?: Record<string, string>; // model id -> media URL (server-side names)
}

export interface RankingRecord {
  volunteer_id: string;
  item_id: string;
  dimension: string;
  ranking: string[] | null; // best -> worst, or null when abstaining
  abstain: boolean;
  timestamp: number;
}

export interface ModelCell {
  points: number;
  score: number;
}

export interface DimensionResults {
  items: Record<string, { models: Record<string, ModelCell>; n_responses: number }>;
  overall: Record<string, number>;
  normalized_pct: Record<string, number>;
}

export interface ResultsBody {
  study_id: string;
  n_volunteers_expected: number;
  models: string[];
  dimensions: Record<string, DimensionResults>;
  store_problems?: string[];
}

export interface SequenceMeta {
  width?: number;
  height?: number;
  fps: number;
  count: number;
}

// Guidance text shown beside each rank board. Keys are the service's
// dimension names; anything unknown falls back to the overall text.
export const DIMENSION_GUIDANCE: Record<string, string> = {
  dynamics:
    "Focus on the movement range of the video: the larger and more complete " +
    "the motion, the higher the rank. Camera movement alone does not count " +
    "as achieved motion; fast or even distorted subject motion outranks a " +
    "near-still clip. Watch frame-to-frame consistency (no objects popping " +
    "in or out) and whether the movement could plausibly occur.",
  naturalness:
    "The more the video resembles the real world, the higher it should " +
    "rank. Clips that look obviously synthetic rank lower.",
  text_compliance:
    "Does the video match the given text? Focus on whether objects from " +
    "the image are recognized and connected to the described action.",
  overall: "Rank by overall video quality, following your own preference.",
};

export function guidanceFor(dimension: string): string {
  return DIMENSION_GUIDANCE[dimension] ?? DIMENSION_GUIDANCE["overall"]!;
}
