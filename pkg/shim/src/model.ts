// Wire-level record types for the dmlens trace format (NDJSON, one object
// per line, header first). Field names here are the on-disk contract the
// analyzer parses; see the repository README for the full schema.

export type EventKind = 'transfer' | 'alloc' | 'delete' | 'kernel';

export interface TraceHeader {
  dmlens: 1;
  num_devices: number;
  host_device: number;
  wall_time_ns?: number;
}

export interface TraceEventRecord {
  seq: number;
  kind: EventKind;
  t0: number;
  t1: number;
  src_dev: number;
  dst_dev: number;
  src_addr: number;
  dst_addr: number;
  bytes: number;
  /** 64-bit content hash; bigint because it exceeds Number.MAX_SAFE_INTEGER. */
  hash: bigint;
  codeptr: number;
  file?: string;
  line?: number;
}

/** Data-op kinds as the runtime reports them: two transfer directions plus
 * device memory management. */
export type DataOpKind = 'transfer_to_device' | 'transfer_from_device' | 'alloc' | 'delete';

export function serializeEvent(e: TraceEventRecord): string {
  // hand-built so the bigint hash lands as a bare JSON integer
  let line =
    `{"seq":${e.seq},"kind":"${e.kind}","t0":${e.t0},"t1":${e.t1}` +
    `,"src_dev":${e.src_dev},"dst_dev":${e.dst_dev}` +
    `,"src_addr":${e.src_addr},"dst_addr":${e.dst_addr}` +
    `,"bytes":${e.bytes},"hash":${e.hash},"codeptr":${e.codeptr}`;
  if (e.file !== undefined) {
    line += `,"file":${JSON.stringify(e.file)},"line":${e.line}`;
  }
  return line + '}';
}

export function serializeHeader(h: TraceHeader): string {
  let line = `{"dmlens":1,"num_devices":${h.num_devices},"host_device":${h.host_device}`;
  if (h.wall_time_ns !== undefined) {
    line += `,"wall_time_ns":${h.wall_time_ns}`;
  }
  return line + '}';
}
