// Event-stream client over fetch, with Last-Event-ID resume.
//
// fetch + ReadableStream instead of EventSource so the same code runs in
// the browser and under node tests, and so the Authorization header can be
// sent (EventSource cannot set headers).

export interface SseEvent {
  event: string;
  data: string;
  id?: number;
}

export type StreamStatus = "connecting" | "open" | "reconnecting" | "ended" | "stopped";

export interface ParseResult {
  events: SseEvent[];
  rest: string;
}

// Pull complete frames (terminated by a blank line) off the front of `buffer`.
export function parseFrames(buffer: string): ParseResult {
  const events: SseEvent[] = [];
  let rest = buffer;
  for (;;) {
    const boundary = rest.indexOf("\n\n");
    if (boundary === -1) break;
    const frame = rest.slice(0, boundary);
    rest = rest.slice(boundary + 2);
    let event = "message";
    let id: number | undefined;
    const dataLines: string[] = [];
    for (const line of frame.split("\n")) {
      if (line.startsWith(":")) continue; // comment / keepalive
      if (line.startsWith("event:")) event = line.slice(6).trim();
      else if (line.startsWith("data:")) dataLines.push(line.slice(5).trimStart());
      else if (line.startsWith("id:")) {
        const parsed = Number.parseInt(line.slice(3).trim(), 10);
        if (!Number.isNaN(parsed)) id = parsed;
      }
    }
    if (dataLines.length > 0 || id !== undefined || event !== "message") {
      events.push({ event, data: dataLines.join("\n"), id });
    }
  }
  return { events, rest };
}

export interface StreamOptions {
  headers?: Record<string, string>;
  lastEventId?: number;
  retryDelayMs?: number;
  onEvent: (ev: SseEvent) => void;
  onStatus?: (status: StreamStatus) => void;
  /** Event types that end the stream for good (no reconnect). */
  terminalEvents?: string[];
}

export class EventStreamClient {
  lastEventId: number | undefined;
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(private url: string, private options: StreamOptions) {
    this.lastEventId = options.lastEventId;
  }

  /** Runs until a terminal event arrives or stop() is called; reconnects on drops. */
  async run(): Promise<void> {
    const terminal = new Set(this.options.terminalEvents ?? ["sealed"]);
    const retryDelay = this.options.retryDelayMs ?? 500;
    let first = true;
    while (!this.stopped) {
      this.options.onStatus?.(first ? "connecting" : "reconnecting");
      first = false;
      this.controller = new AbortController();
      const headers: Record<string, string> = { ...(this.options.headers ?? {}) };
      if (this.lastEventId !== undefined) headers["Last-Event-ID"] = String(this.lastEventId);
      try {
        const response = await fetch(this.url, { headers, signal: this.controller.signal });
        if (!response.ok || !response.body) {
          throw new Error(`stream request failed: ${response.status}`);
        }
        this.options.onStatus?.("open");
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { events, rest } = parseFrames(buffer);
          buffer = rest;
          for (const ev of events) {
            if (ev.id !== undefined) this.lastEventId = ev.id;
            this.options.onEvent(ev);
            if (terminal.has(ev.event)) {
              this.controller.abort();
              this.options.onStatus?.("ended");
              return;
            }
          }
        }
      } catch {
        // dropped connection or forced disconnect: fall through to reconnect
      }
      if (this.stopped) break;
      await new Promise((resolve) => setTimeout(resolve, retryDelay));
    }
    this.options.onStatus?.("stopped");
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  /** Test hook: drop the connection without stopping; run() resumes from lastEventId. */
  forceDisconnect(): void {
    this.controller?.abort();
  }
}
