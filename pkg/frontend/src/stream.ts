// Ordered, exactly-once accumulation of transcript entries by sequence
// number. The server replays from Last-Event-ID on reconnect, so under
// correct operation there are no duplicates and no gaps; both are counted
// here anyway and surfaced as integrity signals rather than repaired.

import type { TranscriptEntry } from "./types.js";

export type AddOutcome = "accepted" | "duplicate" | "gap";

export class TranscriptAccumulator {
  readonly entries: TranscriptEntry[] = [];
  duplicates = 0;
  gaps = 0;
  private seen = new Set<number>();

  get nextSeq(): number {
    return this.entries.length === 0 ? 0 : this.entries[this.entries.length - 1].seq + 1;
  }

  add(entry: TranscriptEntry): AddOutcome {
    if (this.seen.has(entry.seq)) {
      this.duplicates += 1;
      return "duplicate";
    }
    const outcome: AddOutcome = entry.seq === this.nextSeq ? "accepted" : "gap";
    if (outcome === "gap") this.gaps += 1;
    this.seen.add(entry.seq);
    this.entries.push(entry);
    this.entries.sort((a, b) => a.seq - b.seq);
    return outcome;
  }

  /** True when seqs are exactly 0..n-1 with no duplicates recorded. */
  get contiguous(): boolean {
    return (
      this.duplicates === 0 &&
      this.gaps === 0 &&
      this.entries.every((entry, index) => entry.seq === index)
    );
  }
}
