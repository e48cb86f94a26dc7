// Assessor review, headless: verdict, full transcript, flags highlighted
// inside the submission text, and the chain-verification status. Every
// displayed datum comes from an API response; nothing is inferred locally.

import type { Connection } from "./api.js";
import { segmentByFlags, type Segment } from "./highlight.js";
import {
  fetchAssessment,
  fetchExport,
  type AssessmentReport,
  type TranscriptExport,
} from "./oversight.js";
import { ApiError, type TranscriptEntry } from "./types.js";

export interface ReviewState {
  loaded: boolean;
  notConcluded: boolean;
  error: string | null;
  report: AssessmentReport | null;
  transcript: TranscriptEntry[];
  segments: Segment[];
  exportDocument: TranscriptExport | null;
}

export class AssessorReviewController {
  state: ReviewState = {
    loaded: false,
    notConcluded: false,
    error: null,
    report: null,
    transcript: [],
    segments: [],
    exportDocument: null,
  };

  constructor(
    private conn: Connection,
    private onChange: (state: ReviewState) => void = () => {},
  ) {}

  private update(patch: Partial<ReviewState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  async load(sessionId: string): Promise<void> {
    this.update({ loaded: false, error: null, notConcluded: false });
    try {
      const report = await fetchAssessment(this.conn, sessionId);
      const exportDocument = await fetchExport(this.conn, sessionId);
      const segments = report.submission_text
        ? segmentByFlags(report.submission_text, report.flags)
        : [];
      this.update({
        loaded: true,
        report,
        segments,
        transcript: exportDocument.entries,
        exportDocument,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // session still running: show the placeholder, not an error
        this.update({ loaded: true, notConcluded: true });
        return;
      }
      this.update({ loaded: true, error: String(err) });
    }
  }
}
