// HTTP plumbing plus the student-scoped endpoints.
//
// Deliberately contains nothing about flags or verdicts: the student view
// imports only this module, so there is no code path through which that
// material could reach a candidate's screen.

import { ApiError } from "./types.js";

export interface Connection {
  baseUrl: string;
  token: string;
}

export async function request(
  conn: Connection,
  method: string,
  path: string,
  body?: { contentType: string; payload: string },
): Promise<Response> {
  const headers: Record<string, string> = { Authorization: `Bearer ${conn.token}` };
  if (body) headers["Content-Type"] = body.contentType;
  const response = await fetch(conn.baseUrl + path, {
    method,
    headers,
    body: body?.payload,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const parsed = await response.json();
      if (parsed && typeof parsed.detail === "string") detail = parsed.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response;
}

export interface UploadReply {
  question: string;
  questions_remaining: number;
  submission: { word_count: number; sha256: string };
}

export type AnswerReply =
  | { question: string; questions_remaining: number; status?: undefined }
  | { status: "concluded" };

export async function uploadSubmission(
  conn: Connection,
  sessionId: string,
  text: string,
): Promise<UploadReply> {
  const response = await request(conn, "POST", `/sessions/${sessionId}/submission`, {
    contentType: "text/plain",
    payload: text,
  });
  return response.json();
}

export async function submitAnswer(
  conn: Connection,
  sessionId: string,
  answer: string,
): Promise<AnswerReply> {
  const response = await request(conn, "POST", `/sessions/${sessionId}/answers`, {
    contentType: "application/json",
    payload: JSON.stringify({ answer }),
  });
  return response.json();
}
