// DOM wiring for the three role views. All state lives in the headless
// controllers; this file only renders it and forwards user input.

import type { Connection } from "./api.js";
import { AssessorReviewController, type ReviewState } from "./assessor.js";
import { InvigilatorDashboard, TranscriptViewer, type Tile, type ViewerState } from "./invigilator.js";
import { createSession } from "./oversight.js";
import { StudentExamController, type StudentState } from "./student.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

function show(id: string): void {
  for (const section of document.querySelectorAll<HTMLElement>("main > section")) {
    section.hidden = section.id !== id;
  }
}

// ---------------------------------------------------------------------------
// student view
// ---------------------------------------------------------------------------

function renderStudent(state: StudentState): void {
  const uploadPane = el<HTMLDivElement>("student-upload");
  const examPane = el<HTMLDivElement>("student-exam");
  const donePane = el<HTMLDivElement>("student-done");
  uploadPane.hidden = state.phase !== "upload";
  examPane.hidden = state.phase !== "answering";
  donePane.hidden = state.phase !== "concluded" && state.phase !== "aborted";

  el<HTMLParagraphElement>("student-notice").textContent = state.notice ?? "";

  if (state.phase === "answering") {
    const total =
      state.questionsRemaining === null
        ? "?"
        : String(state.questionNumber + state.questionsRemaining);
    el<HTMLHeadingElement>("student-progress").textContent =
      `Examiner question ${state.questionNumber} of ${total}`;
    const log = el<HTMLDivElement>("student-log");
    log.innerHTML = state.exchanges
      .map((exchange) => {
        const answer =
          exchange.answer === null
            ? ""
            : `<div class="turn candidate"><span>You</span><p>${escapeHtml(exchange.answer)}</p></div>`;
        return (
          `<div class="turn examiner"><span>Examiner</span><p>${escapeHtml(exchange.question)}</p></div>` +
          answer
        );
      })
      .join("");
    log.scrollTop = log.scrollHeight;
    el<HTMLTextAreaElement>("student-answer").disabled = state.busy;
    el<HTMLButtonElement>("student-send").disabled = state.busy;
  }

  if (state.phase === "concluded") {
    el<HTMLHeadingElement>("student-done-title").textContent = "Examination concluded";
    el<HTMLParagraphElement>("student-done-body").textContent =
      "Your answers have been recorded and passed to the assessors. You may close this window.";
  } else if (state.phase === "aborted") {
    el<HTMLHeadingElement>("student-done-title").textContent = "Examination ended";
    el<HTMLParagraphElement>("student-done-body").textContent =
      state.notice ?? "The session was ended before completion. Speak to the invigilator.";
  }
}

function startStudent(conn: Connection, sessionId: string): void {
  show("student-view");
  const controller = new StudentExamController(conn, sessionId, renderStudent);
  renderStudent(controller.state);

  el<HTMLInputElement>("student-file").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (file) el<HTMLTextAreaElement>("student-text").value = await file.text();
  });
  el<HTMLButtonElement>("student-upload-btn").addEventListener("click", () => {
    void controller.upload(el<HTMLTextAreaElement>("student-text").value);
  });
  el<HTMLButtonElement>("student-send").addEventListener("click", () => {
    const box = el<HTMLTextAreaElement>("student-answer");
    const text = box.value;
    void controller.answer(text).then(() => {
      if (controller.currentQuestion !== null || controller.state.phase !== "answering") {
        box.value = controller.state.notice ? text : "";
      }
    });
  });
}

// ---------------------------------------------------------------------------
// invigilator view
// ---------------------------------------------------------------------------

let activeViewer: TranscriptViewer | null = null;

function renderTiles(conn: Connection, tiles: Tile[]): void {
  const grid = el<HTMLDivElement>("invig-grid");
  grid.innerHTML = tiles
    .map(
      (tile) => `
      <button class="tile ${tile.alert ? "alert" : ""}" data-sid="${escapeHtml(tile.session_id)}">
        <strong>${escapeHtml(tile.session_id.slice(0, 12))}</strong>
        <span class="badge state-${tile.state}">${tile.state}</span>
        <span>${tile.questions_asked} question(s)</span>
        <span>${tile.flag_count > 0 ? `&#9873; ${tile.flag_count} flag(s)` : "no flags"}</span>
      </button>`,
    )
    .join("");
  for (const button of grid.querySelectorAll<HTMLButtonElement>("button.tile")) {
    button.addEventListener("click", () => openViewer(conn, button.dataset.sid!));
  }
}

function renderViewer(state: ViewerState): void {
  el<HTMLSpanElement>("invig-stream-status").textContent =
    state.status + (state.sealed ? " (sealed)" : "") + (state.contiguous ? "" : " — sequence gap!");
  const alertBox = el<HTMLDivElement>("invig-alert");
  if (state.highSeverityAlert && state.flags) {
    alertBox.hidden = false;
    alertBox.textContent =
      `High-severity flags: ${state.flags.rules.join(", ")} (${state.flags.count} total)`;
  } else {
    alertBox.hidden = true;
  }
  el<HTMLDivElement>("invig-transcript").innerHTML = state.entries
    .map(
      (entry) =>
        `<div class="turn role-${entry.role}"><span>#${entry.seq} ${entry.role}</span>` +
        `<p>${escapeHtml(entry.content)}</p></div>`,
    )
    .join("");
}

function openViewer(conn: Connection, sessionId: string): void {
  activeViewer?.stop();
  el<HTMLDivElement>("invig-pane").hidden = false;
  el<HTMLHeadingElement>("invig-pane-title").textContent = `Live transcript — ${sessionId}`;
  activeViewer = new TranscriptViewer(conn, sessionId, renderViewer);
  void activeViewer.start();
}

function startInvigilator(conn: Connection): void {
  show("invigilator-view");
  const dashboard = new InvigilatorDashboard(conn, (tiles) => renderTiles(conn, tiles));
  void dashboard.refresh();
  setInterval(() => void dashboard.refresh(), 2000);
}

// ---------------------------------------------------------------------------
// assessor view
// ---------------------------------------------------------------------------

function renderReview(state: ReviewState): void {
  const pane = el<HTMLDivElement>("assessor-report");
  if (!state.loaded) {
    pane.innerHTML = "<p>Loading…</p>";
    return;
  }
  if (state.notConcluded) {
    pane.innerHTML = "<p class='placeholder'>This session has not concluded yet.</p>";
    return;
  }
  if (state.error) {
    pane.innerHTML = `<p class="error">${escapeHtml(state.error)}</p>`;
    return;
  }
  const report = state.report!;
  const chainClass = report.chain.valid ? "ok" : "broken";
  const chainText = report.chain.valid
    ? "chain Valid"
    : `chain BROKEN at seq ${report.chain.broken_seq}: ${report.chain.reason}`;
  const verdict = report.verdict
    ? `<div class="verdict"><div class="score">${report.verdict.confidence_score}</div>
       <p>${escapeHtml(report.verdict.assessment)}</p></div>`
    : `<p class="placeholder">No verdict (${escapeHtml(report.abort_reason ?? "aborted")}).</p>`;
  const submission = state.segments
    .map((segment) => {
      const markers = segment.markers
        .map((m) => `<sup class="marker" title="${escapeHtml(m)}">&#9888;</sup>`)
        .join("");
      const body = escapeHtml(segment.text);
      return segment.rules.length > 0
        ? `${markers}<mark title="${escapeHtml(segment.rules.join(", "))}">${body}</mark>`
        : `${markers}${body}`;
    })
    .join("");
  const flags = report.flags
    .map(
      (flag) =>
        `<li><code>${escapeHtml(flag.rule_id)}</code> [${flag.severity}] ` +
        `${escapeHtml(flag.description)} <em>${escapeHtml(flag.excerpt)}</em></li>`,
    )
    .join("");
  const transcript = state.transcript
    .map(
      (entry) =>
        `<div class="turn role-${entry.role}"><span>#${entry.seq} ${entry.role}</span>` +
        `<p>${escapeHtml(entry.content)}</p></div>`,
    )
    .join("");
  pane.innerHTML = `
    <div class="chain ${chainClass}">${escapeHtml(chainText)}</div>
    ${verdict}
    <h3>Submission${report.flags.length > 0 ? " (flagged spans highlighted)" : ""}</h3>
    <div class="submission">${submission}</div>
    ${report.flags.length > 0 ? `<ul class="flags">${flags}</ul>` : ""}
    <h3>Transcript</h3>
    <div class="transcript">${transcript}</div>
    <p><a id="assessor-export-json" href="#">Download canonical JSON export</a></p>`;
  const link = el<HTMLAnchorElement>("assessor-export-json");
  link.addEventListener("click", (event) => {
    event.preventDefault();
    const blob = new Blob([JSON.stringify(state.exportDocument)], { type: "application/json" });
    const url = URL.createObjectURL(blob);
    const a = document.createElement("a");
    a.href = url;
    a.download = `${report.session_id}.transcript.json`;
    a.click();
    URL.revokeObjectURL(url);
  });
}

function startAssessor(conn: Connection): void {
  show("assessor-view");
  const controller = new AssessorReviewController(conn, renderReview);
  el<HTMLButtonElement>("assessor-load").addEventListener("click", () => {
    void controller.load(el<HTMLInputElement>("assessor-sid").value.trim());
  });
  el<HTMLButtonElement>("assessor-create").addEventListener("click", async () => {
    const created = await createSession(conn, {});
    el<HTMLParagraphElement>("assessor-created").textContent =
      `Session ${created.session_id} created — student token: ${created.student_token}`;
  });
}

// ---------------------------------------------------------------------------
// login
// ---------------------------------------------------------------------------

function boot(): void {
  show("login-view");
  el<HTMLButtonElement>("login-btn").addEventListener("click", () => {
    const conn: Connection = {
      baseUrl: el<HTMLInputElement>("login-url").value.replace(/\/$/, ""),
      token: el<HTMLInputElement>("login-token").value.trim(),
    };
    const role = el<HTMLSelectElement>("login-role").value;
    if (role === "student") {
      const sessionId = el<HTMLInputElement>("login-session").value.trim();
      if (!sessionId) {
        el<HTMLParagraphElement>("login-notice").textContent = "Students need a session id.";
        return;
      }
      startStudent(conn, sessionId);
    } else if (role === "invigilator") {
      startInvigilator(conn);
    } else {
      startAssessor(conn);
    }
  });
}

boot();
