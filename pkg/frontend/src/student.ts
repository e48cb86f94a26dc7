// Student examination view, headless.
//
// Holds exactly what the candidate may see: the current question, how many
// questions may still come, and their own transcript of the exchange. On
// conclusion the phase flips to "concluded" and nothing else arrives; the
// verdict is assessor-only and this module has no way to represent it.

import { submitAnswer, uploadSubmission, type Connection } from "./api.js";
import { ApiError } from "./types.js";

export type StudentPhase = "upload" | "answering" | "concluded" | "aborted";

export interface Exchange {
  question: string;
  answer: string | null;
}

export interface StudentState {
  phase: StudentPhase;
  questionNumber: number; // 1-based index of the current question
  questionsRemaining: number | null;
  exchanges: Exchange[];
  notice: string | null; // transient guidance (validation, retry advice)
  busy: boolean;
}

export class StudentExamController {
  state: StudentState = {
    phase: "upload",
    questionNumber: 0,
    questionsRemaining: null,
    exchanges: [],
    notice: null,
    busy: false,
  };

  constructor(
    private conn: Connection,
    private sessionId: string,
    private onChange: (state: StudentState) => void = () => {},
  ) {}

  private update(patch: Partial<StudentState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  get currentQuestion(): string | null {
    const last = this.state.exchanges[this.state.exchanges.length - 1];
    return last && last.answer === null ? last.question : null;
  }

  async upload(text: string): Promise<void> {
    if (this.state.phase !== "upload" || this.state.busy) return;
    if (!text.trim()) {
      this.update({ notice: "The submission is empty; paste or attach your work first." });
      return;
    }
    this.update({ busy: true, notice: null });
    try {
      const reply = await uploadSubmission(this.conn, this.sessionId, text);
      this.update({
        phase: "answering",
        questionNumber: 1,
        questionsRemaining: reply.questions_remaining,
        exchanges: [{ question: reply.question, answer: null }],
        busy: false,
      });
    } catch (err) {
      this.handleError(err, "Upload failed");
    }
  }

  async answer(text: string): Promise<void> {
    if (this.state.phase !== "answering" || this.state.busy) return;
    if (!text.trim()) {
      // client-side validation: an empty answer never reaches the server
      this.update({ notice: "An answer is required before sending." });
      return;
    }
    this.update({ busy: true, notice: null });
    try {
      const reply = await submitAnswer(this.conn, this.sessionId, text);
      const exchanges = this.state.exchanges.slice();
      const current = exchanges[exchanges.length - 1];
      if (current && current.answer === null) {
        exchanges[exchanges.length - 1] = { ...current, answer: text };
      }
      if (reply.status === "concluded") {
        this.update({ phase: "concluded", exchanges, questionsRemaining: 0, busy: false });
        return;
      }
      exchanges.push({ question: reply.question, answer: null });
      this.update({
        exchanges,
        questionNumber: this.state.questionNumber + 1,
        questionsRemaining: reply.questions_remaining,
        busy: false,
      });
    } catch (err) {
      this.handleError(err, "Sending the answer failed");
    }
  }

  private handleError(err: unknown, prefix: string): void {
    if (err instanceof ApiError) {
      if (err.status === 503) {
        this.update({
          busy: false,
          notice: `${prefix}: the examiner is temporarily unavailable (${err.detail}). ` +
            "Your progress is saved; send again to retry.",
        });
        return;
      }
      if (err.status === 409 && /abort|timeout/i.test(err.detail)) {
        this.update({ busy: false, phase: "aborted", notice: err.detail });
        return;
      }
      this.update({ busy: false, notice: `${prefix}: ${err.detail}` });
      return;
    }
    this.update({ busy: false, notice: `${prefix}: ${String(err)}. Check the connection and retry.` });
  }
}
