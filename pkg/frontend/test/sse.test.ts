import { describe, expect, it } from "vitest";

import { parseFrames } from "../src/sse.js";

describe("parseFrames", () => {
  it("parses a complete entry frame", () => {
    const { events, rest } = parseFrames('id: 3\nevent: entry\ndata: {"seq":3}\n\n');
    expect(rest).toBe("");
    expect(events).toEqual([{ id: 3, event: "entry", data: '{"seq":3}' }]);
  });

  it("keeps an incomplete frame in the buffer", () => {
    const { events, rest } = parseFrames("id: 1\nevent: entry\ndata: {");
    expect(events).toEqual([]);
    expect(rest).toBe("id: 1\nevent: entry\ndata: {");
  });

  it("parses several frames from one chunk", () => {
    const buffer = "id: 0\nevent: entry\ndata: a\n\nevent: flag\ndata: b\n\nevent: sealed\ndata: c\n\n";
    const { events } = parseFrames(buffer);
    expect(events.map((e) => e.event)).toEqual(["entry", "flag", "sealed"]);
    expect(events[0].id).toBe(0);
    expect(events[1].id).toBeUndefined();
  });

  it("ignores keepalive comments", () => {
    const { events } = parseFrames(": keepalive\n\nid: 2\nevent: entry\ndata: x\n\n");
    expect(events).toEqual([{ id: 2, event: "entry", data: "x" }]);
  });

  it("joins multi-line data", () => {
    const { events } = parseFrames("event: entry\ndata: line1\ndata: line2\n\n");
    expect(events[0].data).toBe("line1\nline2");
  });
});
