// Wire types mirroring the service's JSON contracts.

export type SessionStateName =
  | "Created"
  | "SubmissionIngested"
  | "AwaitingQuestion"
  | "AwaitingAnswer"
  | "ConcludingForced"
  | "Completed"
  | "Aborted";

export type EntryRole = "System" | "Examiner" | "Candidate" | "Verdict" | "Note";

export interface TranscriptEntry {
  session_id: string;
  seq: number;
  timestamp: string;
  role: EntryRole;
  content: string;
  prev_hash: string;
  entry_hash: string;
}

export interface SessionSummary {
  session_id: string;
  state: SessionStateName;
  questions_asked: number;
  flag_count: number;
  created_at: string;
  concluded_at: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}
