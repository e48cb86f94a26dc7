// Invigilator/assessor endpoints: cohort listing, assessment reports,
// exports, aborts. Kept apart from api.ts so the student view never
// imports anything that can carry flags or verdict content.

import { request, type Connection } from "./api.js";
import type { SessionSummary, SessionStateName, TranscriptEntry } from "./types.js";

export interface InjectionFlag {
  rule_id: string;
  severity: "Low" | "Medium" | "High";
  span: [number, number];
  excerpt: string;
  description: string;
}

export interface FlagNotice {
  kind: string;
  count: number;
  rules: string[];
  flags: InjectionFlag[];
}

export interface ChainReport {
  valid: boolean;
  broken_seq: number | null;
  expected_hash: string | null;
  found_hash: string | null;
  reason: string;
}

export interface AssessmentReport {
  session_id: string;
  state: SessionStateName;
  verdict: { assessment: string; confidence_score: number } | null;
  abort_reason: string | null;
  flags: InjectionFlag[];
  submission_text: string | null;
  chain: ChainReport;
  export: { json: string; text: string };
}

export interface TranscriptExport {
  format_version: string;
  header: Record<string, unknown>;
  submission: { text: string; flags: InjectionFlag[] } | null;
  entries: TranscriptEntry[];
  verdict: { assessment: string; confidence_score: number } | null;
  sealed_at: string | null;
}

export async function createSession(
  conn: Connection,
  config: Record<string, unknown> = {},
): Promise<{ session_id: string; student_token: string; state: SessionStateName }> {
  const response = await request(conn, "POST", "/sessions", {
    contentType: "application/json",
    payload: JSON.stringify(config),
  });
  return response.json();
}

export async function listSessions(
  conn: Connection,
  offset = 0,
  limit = 500,
): Promise<{ total: number; sessions: SessionSummary[] }> {
  const response = await request(conn, "GET", `/sessions?offset=${offset}&limit=${limit}`);
  return response.json();
}

export async function fetchAssessment(conn: Connection, sessionId: string): Promise<AssessmentReport> {
  const response = await request(conn, "GET", `/sessions/${sessionId}/assessment`);
  return response.json();
}

export async function fetchExport(conn: Connection, sessionId: string): Promise<TranscriptExport> {
  const response = await request(conn, "GET", `/sessions/${sessionId}/export?format=json`);
  return response.json();
}

export async function abortSession(conn: Connection, sessionId: string, reason: string): Promise<void> {
  await request(conn, "POST", `/sessions/${sessionId}/abort`, {
    contentType: "application/json",
    payload: JSON.stringify({ reason }),
  });
}
