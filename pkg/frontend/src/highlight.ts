// Turn byte-offset flag spans into renderable text segments.
//
// Flag spans index the UTF-8 encoding of the submission text, so char
// positions must be recovered through an encoder; slicing the JS string
// directly would drift on any non-ASCII text.

import type { InjectionFlag } from "./oversight.js";

export interface Segment {
  text: string;
  rules: string[]; // rule ids covering this segment; empty = unflagged
  /** descriptions of zero-width flags anchored at the start of this segment */
  markers: string[];
}

interface CharSpan {
  start: number;
  end: number;
  flag: InjectionFlag;
}

function byteToCharTable(text: string): { table: Uint32Array; totalBytes: number } {
  const encoder = new TextEncoder();
  let bytes = 0;
  const boundaries: Array<[number, number]> = [[0, 0]]; // [byteOffset, charIndex]
  for (let i = 0; i < text.length; ) {
    const codePoint = text.codePointAt(i)!;
    const charLen = codePoint > 0xffff ? 2 : 1;
    bytes += encoder.encode(String.fromCodePoint(codePoint)).length;
    i += charLen;
    boundaries.push([bytes, i]);
  }
  const table = new Uint32Array(bytes + 1);
  let b = 0;
  for (const [byteOffset, charIndex] of boundaries) {
    while (b <= byteOffset) {
      table[b] = charIndex;
      b += 1;
    }
  }
  while (b <= bytes) {
    table[b] = text.length;
    b += 1;
  }
  return { table, totalBytes: bytes };
}

export function segmentByFlags(text: string, flags: InjectionFlag[]): Segment[] {
  const { table, totalBytes } = byteToCharTable(text);
  const toChar = (byteOffset: number) =>
    table[Math.max(0, Math.min(byteOffset, totalBytes))];

  const spans: CharSpan[] = [];
  const markersAt = new Map<number, string[]>();
  for (const flag of flags) {
    const start = toChar(flag.span[0]);
    const end = toChar(flag.span[1]);
    if (start === end) {
      const existing = markersAt.get(start) ?? [];
      existing.push(flag.description);
      markersAt.set(start, existing);
    } else {
      spans.push({ start, end, flag });
    }
  }

  const boundaries = new Set<number>([0, text.length]);
  for (const span of spans) {
    boundaries.add(span.start);
    boundaries.add(span.end);
  }
  for (const position of markersAt.keys()) boundaries.add(position);
  const ordered = [...boundaries].sort((a, b) => a - b);

  const segments: Segment[] = [];
  for (let i = 0; i < ordered.length - 1; i++) {
    const [from, to] = [ordered[i], ordered[i + 1]];
    const rules = spans
      .filter((s) => s.start < to && s.end > from)
      .map((s) => s.flag.rule_id);
    segments.push({
      text: text.slice(from, to),
      rules: [...new Set(rules)],
      markers: markersAt.get(from) ?? [],
    });
  }
  // a marker anchored at the very end of the text still needs a home
  const tailMarkers = markersAt.get(text.length);
  if (tailMarkers && (segments.length === 0 || ordered[ordered.length - 1] === text.length)) {
    segments.push({ text: "", rules: [], markers: tailMarkers });
  }
  return segments;
}
