// Invigilator dashboard, headless: a cohort grid refreshed by polling the
// listing, plus live transcript viewers fed by the event stream with
// resume-on-reconnect.

import type { Connection } from "./api.js";
import { listSessions, type FlagNotice } from "./oversight.js";
import { EventStreamClient, type SseEvent, type StreamStatus } from "./sse.js";
import { TranscriptAccumulator } from "./stream.js";
import type { SessionSummary, TranscriptEntry } from "./types.js";

export interface Tile extends SessionSummary {
  alert: boolean; // a flagged submission wants a human eye
}

export class InvigilatorDashboard {
  tiles: Tile[] = [];
  error: string | null = null;

  constructor(
    private conn: Connection,
    private onChange: (tiles: Tile[]) => void = () => {},
  ) {}

  async refresh(): Promise<void> {
    try {
      const { sessions } = await listSessions(this.conn);
      this.tiles = sessions.map((s) => ({ ...s, alert: s.flag_count > 0 }));
      this.error = null;
    } catch (err) {
      this.error = String(err);
    }
    this.onChange(this.tiles);
  }
}

export interface ViewerState {
  entries: TranscriptEntry[];
  flags: FlagNotice | null;
  highSeverityAlert: boolean;
  status: StreamStatus;
  sealed: boolean;
  contiguous: boolean;
}

export class TranscriptViewer {
  readonly accumulator = new TranscriptAccumulator();
  flags: FlagNotice | null = null;
  status: StreamStatus = "connecting";
  sealed = false;
  private client: EventStreamClient;
  private running: Promise<void> | null = null;

  constructor(
    conn: Connection,
    sessionId: string,
    private onChange: (state: ViewerState) => void = () => {},
  ) {
    this.client = new EventStreamClient(`${conn.baseUrl}/sessions/${sessionId}/events`, {
      headers: { Authorization: `Bearer ${conn.token}` },
      onEvent: (ev) => this.handle(ev),
      onStatus: (status) => {
        this.status = status;
        this.emit();
      },
    });
  }

  get state(): ViewerState {
    return {
      entries: this.accumulator.entries,
      flags: this.flags,
      highSeverityAlert:
        this.flags !== null && this.flags.flags.some((f) => f.severity === "High"),
      status: this.status,
      sealed: this.sealed,
      contiguous: this.accumulator.contiguous,
    };
  }

  private emit(): void {
    this.onChange(this.state);
  }

  private handle(ev: SseEvent): void {
    if (ev.event === "entry") {
      this.accumulator.add(JSON.parse(ev.data) as TranscriptEntry);
    } else if (ev.event === "flag") {
      this.flags = JSON.parse(ev.data) as FlagNotice;
    } else if (ev.event === "sealed") {
      this.sealed = true;
    }
    this.emit();
  }

  start(): Promise<void> {
    if (!this.running) this.running = this.client.run();
    return this.running;
  }

  stop(): void {
    this.client.stop();
  }

  /** Test hook: simulate a network blip; the client resumes from the last seq. */
  forceReconnect(): void {
    this.client.forceDisconnect();
  }
}
