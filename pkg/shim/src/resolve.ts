// Code-pointer to source-line resolution.
//
// The native capture agent reads DWARF debug info for this; in this
// JS/TS port the debug information arrives as a pre-extracted symbol map
// (sorted address ranges with file/line). Resolution is best-effort and
// never fatal: unresolved addresses keep their raw code pointer, and
// codeptr 0 ("unknown") is never looked up.

import { TraceEventRecord } from './model.js';

export interface SymbolRange {
  /** first address covered by this range */
  start: number;
  /** one past the last covered address */
  end: number;
  file: string;
  line: number;
}

export class SymbolMap {
  private ranges: SymbolRange[];

  constructor(ranges: SymbolRange[]) {
    this.ranges = [...ranges].sort((a, b) => a.start - b.start);
  }

  static fromJSON(text: string): SymbolMap {
    const parsed = JSON.parse(text) as SymbolRange[];
    return new SymbolMap(parsed);
  }

  lookup(addr: number): { file: string; line: number } | undefined {
    if (addr === 0) return undefined;
    // binary search for the last range starting at or before addr
    let lo = 0;
    let hi = this.ranges.length - 1;
    let best = -1;
    while (lo <= hi) {
      const mid = (lo + hi) >> 1;
      if (this.ranges[mid].start <= addr) {
        best = mid;
        lo = mid + 1;
      } else {
        hi = mid - 1;
      }
    }
    if (best < 0) return undefined;
    const r = this.ranges[best];
    return addr < r.end ? { file: r.file, line: r.line } : undefined;
  }
}

/** Fill in file/line for every event whose codeptr resolves; events that
 * don't resolve pass through untouched. Returns the number resolved. */
export function resolveLocations(events: TraceEventRecord[], symbols: SymbolMap): number {
  let resolved = 0;
  for (const e of events) {
    if (e.file !== undefined || e.codeptr === 0) continue;
    const hit = symbols.lookup(e.codeptr);
    if (hit) {
      e.file = hit.file;
      e.line = hit.line;
      resolved++;
    }
  }
  return resolved;
}
