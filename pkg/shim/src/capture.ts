// Capture agent core: turns paired begin/end runtime callbacks into dmlens
// trace events.
//
// Mirrors the native agent's design: callbacks may arrive on any thread, so
// events append to per-thread buffers (no global lock on the hot path) and
// are merge-sorted once at finalize. A begin/end pair becomes one event
// carrying both timestamps. Transfer payloads are hashed on the host side
// inside the op's begin/end window; in audit mode a copy of every hashed
// payload is kept and dumped as <seq>.bin next to the trace.
//
// Sequence numbers are provisional during capture and renumbered at
// finalize in (t0, arrival) order, which is what makes the emitted file
// satisfy the analyzer's ordering invariants even when ops overlap.
//
// Environment: DMLENS_OUT is the default trace path, DMLENS_AUDIT_DIR
// (optional) enables payload dumping.

import { mkdirSync, writeFileSync } from 'fs';
import { join } from 'path';

import { hash64 } from './hash64.js';
import {
  DataOpKind,
  EventKind,
  TraceEventRecord,
  TraceHeader,
  serializeEvent,
  serializeHeader,
} from './model.js';

export interface ShimOptions {
  /** trace output path; falls back to $DMLENS_OUT */
  outPath?: string;
  /** payload dump directory (audit mode); falls back to $DMLENS_AUDIT_DIR */
  auditDir?: string;
  /** ns clock with origin at shim init; defaults to process.hrtime */
  clock?: () => number;
}

export interface TargetCallback {
  /** runtime-assigned correlation id for the target region */
  targetId: number;
  /** runtime device id the kernel executes on */
  deviceId: number;
  codeptr?: number;
  threadId?: number;
  timeNs?: number;
}

export interface DataOpCallback {
  /** runtime-assigned correlation id for the data operation */
  hostOpId: number;
  optype: DataOpKind;
  srcDeviceId: number;
  destDeviceId: number;
  srcAddr?: number;
  destAddr?: number;
  bytes?: number;
  codeptr?: number;
  threadId?: number;
  timeNs?: number;
  /** host-side view of the transferred bytes, when readable */
  hostBuffer?: Uint8Array;
}

export interface ShimWarnings {
  unmatchedEnds: number;
  unfinishedAtExit: number;
  hashSkipped: number;
  droppedMalformed: number;
}

interface PendingOp {
  t0: number;
  provisional: number;
  kind: EventKind;
  src_dev: number;
  dst_dev: number;
  src_addr: number;
  dst_addr: number;
  bytes: number;
  hash: bigint;
  codeptr: number;
  threadId: number;
  payload?: Uint8Array;
}

interface BufferedEvent extends Omit<TraceEventRecord, 'seq'> {
  provisional: number;
  payload?: Uint8Array;
}

export class CaptureShim {
  readonly hostSlot = 0;

  private options: ShimOptions;
  private origin: bigint | null = null;
  private provisionalNext = 0;
  private buffers = new Map<number, BufferedEvent[]>();
  private deviceSlots = new Map<number, number>(); // runtime device id -> trace slot
  private pendingTargets = new Map<number, PendingOp>();
  private pendingDataOps = new Map<number, PendingOp>();
  private counters: ShimWarnings = {
    unmatchedEnds: 0,
    unfinishedAtExit: 0,
    hashSkipped: 0,
    droppedMalformed: 0,
  };

  constructor(hostDeviceId: number, options: ShimOptions = {}) {
    this.options = options;
    this.deviceSlots.set(hostDeviceId, this.hostSlot);
  }

  // -- clock and device normalization --------------------------------------

  private now(): number {
    if (this.options.clock) return this.options.clock();
    if (this.origin === null) this.origin = process.hrtime.bigint();
    return Number(process.hrtime.bigint() - this.origin);
  }

  /** Runtime device numbering is implementation-defined; normalize to dense
   * trace slots with the host pinned at slot 0. */
  deviceSlot(runtimeId: number): number {
    let slot = this.deviceSlots.get(runtimeId);
    if (slot === undefined) {
      slot = this.deviceSlots.size;
      this.deviceSlots.set(runtimeId, slot);
    }
    return slot;
  }

  get warnings(): ShimWarnings {
    return { ...this.counters };
  }

  private buffer(threadId: number): BufferedEvent[] {
    let buf = this.buffers.get(threadId);
    if (buf === undefined) {
      buf = [];
      this.buffers.set(threadId, buf);
    }
    return buf;
  }

  private emit(pending: PendingOp, t1: number): void {
    this.buffer(pending.threadId).push({
      provisional: pending.provisional,
      kind: pending.kind,
      t0: pending.t0,
      t1,
      src_dev: pending.src_dev,
      dst_dev: pending.dst_dev,
      src_addr: pending.src_addr,
      dst_addr: pending.dst_addr,
      bytes: pending.bytes,
      hash: pending.hash,
      codeptr: pending.codeptr,
      payload: pending.payload,
    });
  }

  // -- target (kernel) callbacks --------------------------------------------

  onTargetBegin(cb: TargetCallback): void {
    const slot = this.deviceSlot(cb.deviceId);
    this.pendingTargets.set(cb.targetId, {
      t0: cb.timeNs ?? this.now(),
      provisional: this.provisionalNext++,
      kind: 'kernel',
      src_dev: slot,
      dst_dev: slot,
      src_addr: 0,
      dst_addr: 0,
      bytes: 0,
      hash: 0n,
      codeptr: cb.codeptr ?? 0,
      threadId: cb.threadId ?? 0,
    });
  }

  onTargetEnd(cb: TargetCallback): void {
    const pending = this.pendingTargets.get(cb.targetId);
    if (pending === undefined) {
      this.counters.unmatchedEnds++;
      return;
    }
    this.pendingTargets.delete(cb.targetId);
    this.emit(pending, cb.timeNs ?? this.now());
  }

  // -- data-op callbacks -----------------------------------------------------

  onDataOpBegin(cb: DataOpCallback): void {
    const pending = this.makeDataOp(cb);
    if (pending !== null) this.pendingDataOps.set(cb.hostOpId, pending);
  }

  onDataOpEnd(cb: DataOpCallback): void {
    const pending = this.pendingDataOps.get(cb.hostOpId);
    if (pending === undefined) {
      this.counters.unmatchedEnds++;
      return;
    }
    this.pendingDataOps.delete(cb.hostOpId);
    if (pending.kind === 'transfer') {
      // a device-to-host payload is only complete (and hashable) at the end
      if (cb.hostBuffer !== undefined && pending.bytes > 0) {
        pending.hash = hash64(cb.hostBuffer);
        if (this.options.auditDir ?? process.env.DMLENS_AUDIT_DIR) {
          pending.payload = cb.hostBuffer.slice();
        }
      }
      if (pending.bytes > 0 && pending.hash === 0n) {
        // host buffer never readable: no content identity, and the analyzer
        // refuses non-empty hashless transfers, so record it as opaque
        this.counters.hashSkipped++;
        pending.bytes = 0;
      }
    }
    this.emit(pending, cb.timeNs ?? this.now());
  }

  private makeDataOp(cb: DataOpCallback): PendingOp | null {
    const base = {
      t0: cb.timeNs ?? this.now(),
      provisional: this.provisionalNext++,
      codeptr: cb.codeptr ?? 0,
      threadId: cb.threadId ?? 0,
      hash: 0n,
      payload: undefined as Uint8Array | undefined,
    };
    const bytes = cb.bytes ?? 0;
    if (cb.optype === 'alloc') {
      if (bytes <= 0 || !cb.destAddr) {
        this.counters.droppedMalformed++;
        return null;
      }
      return {
        ...base, kind: 'alloc',
        src_dev: this.deviceSlot(cb.srcDeviceId), dst_dev: this.deviceSlot(cb.destDeviceId),
        src_addr: cb.srcAddr ?? 0, dst_addr: cb.destAddr, bytes,
      };
    }
    if (cb.optype === 'delete') {
      if (!cb.destAddr) {
        this.counters.droppedMalformed++;
        return null;
      }
      return {
        ...base, kind: 'delete',
        src_dev: this.deviceSlot(cb.srcDeviceId), dst_dev: this.deviceSlot(cb.destDeviceId),
        src_addr: 0, dst_addr: cb.destAddr, bytes: 0,
      };
    }
    // transfer, either direction; hash the host-side buffer when readable
    // (host-to-device payloads are complete here, device-to-host only at end)
    let hash = 0n;
    let payload: Uint8Array | undefined;
    if (cb.hostBuffer !== undefined && bytes > 0) {
      hash = hash64(cb.hostBuffer);
      if (this.options.auditDir ?? process.env.DMLENS_AUDIT_DIR) {
        payload = cb.hostBuffer.slice();
      }
    }
    return {
      ...base, kind: 'transfer',
      src_dev: this.deviceSlot(cb.srcDeviceId), dst_dev: this.deviceSlot(cb.destDeviceId),
      src_addr: cb.srcAddr ?? 0, dst_addr: cb.destAddr ?? 0,
      bytes, hash, payload,
    };
  }

  // -- finalize ---------------------------------------------------------------

  /** Merge per-thread buffers, renumber, and serialize. Leaves capture state
   * untouched, so it may be called repeatedly (e.g. periodic snapshots). */
  finalize(wallTimeNs?: number): {
    header: TraceHeader;
    events: TraceEventRecord[];
    payloads: Map<number, Uint8Array>;
    text: string;
  } {
    const merged: BufferedEvent[] = [];
    for (const buf of this.buffers.values()) merged.push(...buf);
    merged.sort((a, b) => (a.t0 - b.t0) || (a.provisional - b.provisional));

    const payloads = new Map<number, Uint8Array>();
    const events: TraceEventRecord[] = merged.map((e, seq) => {
      if (e.payload !== undefined) payloads.set(seq, e.payload);
      const { provisional, payload, ...rest } = e;
      return { seq, ...rest };
    });

    const wall = wallTimeNs ?? events.reduce((acc, e) => Math.max(acc, e.t1), 0);
    const header: TraceHeader = {
      dmlens: 1,
      num_devices: this.deviceSlots.size,
      host_device: this.hostSlot,
      wall_time_ns: wall,
    };
    const lines = [serializeHeader(header), ...events.map(serializeEvent), ''];
    this.counters.unfinishedAtExit = this.pendingTargets.size + this.pendingDataOps.size;
    return { header, events, payloads, text: lines.join('\n') };
  }

  /** Finalize and write the trace (and payload sidecars in audit mode).
   * Returns the trace path. */
  writeTrace(wallTimeNs?: number): string {
    const outPath = this.options.outPath ?? process.env.DMLENS_OUT;
    if (!outPath) {
      throw new Error('no output path: pass options.outPath or set DMLENS_OUT');
    }
    const { payloads, text } = this.finalize(wallTimeNs);
    writeFileSync(outPath, text, 'utf8');

    const auditDir = this.options.auditDir ?? process.env.DMLENS_AUDIT_DIR;
    if (auditDir) {
      mkdirSync(auditDir, { recursive: true });
      for (const [seq, payload] of payloads) {
        writeFileSync(join(auditDir, `${seq}.bin`), payload);
      }
    }
    return outPath;
  }
}
