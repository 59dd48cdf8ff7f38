// Per-assignment ranking draft. The only mutations are moving a slot within
// its dimension's ordering and toggling abstention, so a draft can never
// hold anything but a full permutation (or an abstain flag) per dimension --
// the non-permutation case is unrepresentable by construction.

import { deanonymize, SlotMapping } from "./blind.js";
import { RankingRecord } from "./types.js";

interface DimensionDraft {
  order: string[]; // slots, best first
  abstain: boolean;
  touched: boolean; // volunteer interacted (ranked or abstained)
}

export class RankingDraft {
  private dims = new Map<string, DimensionDraft>();

  constructor(dimensions: readonly string[], slots: readonly string[]) {
    if (new Set(slots).size !== slots.length) {
      throw new Error("duplicate slots");
    }
    for (const dim of dimensions) {
      this.dims.set(dim, { order: [...slots], abstain: false, touched: false });
    }
  }

  get dimensions(): string[] {
    return [...this.dims.keys()];
  }

  order(dimension: string): string[] {
    return [...this.entry(dimension).order];
  }

  isAbstained(dimension: string): boolean {
    return this.entry(dimension).abstain;
  }

  /** Move the slot at `from` to position `to` (ranks are 0-based). */
  move(dimension: string, from: number, to: number): void {
    const entry = this.entry(dimension);
    if (entry.abstain) return; // abstained boards are inert
    const n = entry.order.length;
    if (from < 0 || from >= n || to < 0 || to >= n) return;
    const [slot] = entry.order.splice(from, 1);
    entry.order.splice(to, 0, slot!);
    entry.touched = true;
  }

  moveSlot(dimension: string, slot: string, to: number): void {
    const from = this.entry(dimension).order.indexOf(slot);
    if (from >= 0) this.move(dimension, from, to);
  }

  confirmOrder(dimension: string): void {
    this.entry(dimension).touched = true;
  }

  toggleAbstain(dimension: string): void {
    const entry = this.entry(dimension);
    entry.abstain = !entry.abstain;
    entry.touched = entry.abstain ? true : entry.touched;
  }

  /** Submission unlocks only when every dimension is ranked or abstained. */
  isComplete(): boolean {
    return [...this.dims.values()].every((d) => d.abstain || d.touched);
  }

  toRecords(
    mapping: SlotMapping,
    volunteerId: string,
    itemId: string,
  ): RankingRecord[] {
    if (!this.isComplete()) {
      throw new Error("draft incomplete: rank or abstain every dimension");
    }
    const now = Date.now() / 1000;
    return this.dimensions.map((dim) => {
      const entry = this.entry(dim);
      return {
        volunteer_id: volunteerId,
        item_id: itemId,
        dimension: dim,
        ranking: entry.abstain ? null : deanonymize(mapping, entry.order),
        abstain: entry.abstain,
        timestamp: now,
      };
    });
  }

  private entry(dimension: string): DimensionDraft {
    const entry = this.dims.get(dimension);
    if (!entry) throw new Error(`unknown dimension ${dimension}`);
    return entry;
  }
}
