// End-to-end: a simulated offload program (two kernels, each re-mapping and
// re-transferring the same unchanged array -- the canonical wasteful shape)
// is driven through the shim callbacks exactly as a runtime would fire
// them. The emitted trace file is then fed to the Python analyzer CLI,
// which must accept it (format + invariants), report at least one duplicate
// group and one repeated-allocation group, and attribute them to resolved
// file:line locations.

import { execFileSync } from 'child_process';
import { mkdtempSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

import { describe, expect, it } from 'vitest';

import { CaptureShim } from '../src/capture.js';
import { SymbolMap, resolveLocations } from '../src/resolve.js';
import { serializeEvent, serializeHeader } from '../src/model.js';
import { writeFileSync } from 'fs';

const HOST = 4; // runtime numbers the host after the four target devices
const DEV = 0;

const SYMBOLS = new SymbolMap([
  { start: 0x400100, end: 0x400200, file: 'twokernel.c', line: 14 },
  { start: 0x400200, end: 0x400300, file: 'twokernel.c', line: 22 },
]);

/** Drive the callbacks the way a runtime executes
 *  `for region in {1,2}: map(to:a){ kernel }` with no data reuse. */
function runTwoKernelProgram(shim: CaptureShim): void {
  const array = Uint8Array.from({ length: 4096 }, (_, i) => (i * 37) & 0xff);
  let t = 0;
  let opId = 0;
  const tick = (ns: number) => (t += ns);

  for (const regionCodeptr of [0x400110, 0x400210]) {
    const allocId = ++opId;
    shim.onDataOpBegin({
      hostOpId: allocId, optype: 'alloc',
      srcDeviceId: HOST, destDeviceId: DEV,
      srcAddr: 0x7ffc1000, destAddr: 0xd0001000, bytes: array.length,
      codeptr: regionCodeptr, timeNs: tick(10),
    });
    shim.onDataOpEnd({ hostOpId: allocId, optype: 'alloc',
                       srcDeviceId: HOST, destDeviceId: DEV, timeNs: tick(400) });

    const txId = ++opId;
    shim.onDataOpBegin({
      hostOpId: txId, optype: 'transfer_to_device',
      srcDeviceId: HOST, destDeviceId: DEV,
      srcAddr: 0x7ffc1000, destAddr: 0xd0001000, bytes: array.length,
      hostBuffer: array, codeptr: regionCodeptr, timeNs: tick(10),
    });
    shim.onDataOpEnd({ hostOpId: txId, optype: 'transfer_to_device',
                       srcDeviceId: HOST, destDeviceId: DEV, timeNs: tick(2000) });

    const targetId = ++opId;
    shim.onTargetBegin({ targetId, deviceId: DEV, codeptr: regionCodeptr, timeNs: tick(10) });
    shim.onTargetEnd({ targetId, deviceId: DEV, timeNs: tick(50_000) });

    const deleteId = ++opId;
    shim.onDataOpBegin({
      hostOpId: deleteId, optype: 'delete',
      srcDeviceId: HOST, destDeviceId: DEV,
      destAddr: 0xd0001000, codeptr: regionCodeptr, timeNs: tick(10),
    });
    shim.onDataOpEnd({ hostOpId: deleteId, optype: 'delete',
                       srcDeviceId: HOST, destDeviceId: DEV, timeNs: tick(400) });
  }
}

function analyzeWithCli(tracePath: string): any {
  const stdout = execFileSync(
    'python3', ['-m', 'dmlens.cli', 'analyze', '--json', '--oracle', tracePath],
    { encoding: 'utf8' },
  );
  return JSON.parse(stdout);
}

describe('shim trace consumed by the analyzer', () => {
  it('two-kernel same-array program: duplicate + repeated-alloc reported with file:line', () => {
    const dir = mkdtempSync(join(tmpdir(), 'dmlens-e2e-'));
    const tracePath = join(dir, 'twokernel.trace');
    const shim = new CaptureShim(HOST, { outPath: tracePath });
    runTwoKernelProgram(shim);

    // debug-info pass: resolve code pointers before writing
    const { header, events } = shim.finalize();
    expect(resolveLocations(events, SYMBOLS)).toBeGreaterThan(0);
    const text = [serializeHeader(header), ...events.map(serializeEvent), ''].join('\n');
    writeFileSync(tracePath, text);

    const report = analyzeWithCli(tracePath);
    expect(report.finding_counts.DD).toBeGreaterThanOrEqual(1);
    expect(report.finding_counts.RA).toBeGreaterThanOrEqual(1);
    expect(report.savings.union_ns).toBeGreaterThan(0);
    expect(report.savings.predicted_speedup).toBeGreaterThan(1.0);

    const locations = ['DD', 'RA'].flatMap((category) =>
      report.issues[category].map((issue: any) => issue.location.display));
    expect(locations.some((loc: string) => /twokernel\.c:\d+/.test(loc))).toBe(true);
  });

  it('stripped-binary analogue: no symbol map, raw code pointers survive', () => {
    const dir = mkdtempSync(join(tmpdir(), 'dmlens-e2e-'));
    const tracePath = join(dir, 'stripped.trace');
    const shim = new CaptureShim(HOST, { outPath: tracePath });
    runTwoKernelProgram(shim);
    shim.writeTrace();

    const report = analyzeWithCli(tracePath);
    expect(report.finding_counts.DD).toBeGreaterThanOrEqual(1);
    const displays = report.issues.DD.map((issue: any) => issue.location.display);
    expect(displays.some((d: string) => d.startsWith('0x'))).toBe(true);
  });

  it('audit sidecars from the shim satisfy the analyzer collision audit', () => {
    const dir = mkdtempSync(join(tmpdir(), 'dmlens-e2e-'));
    const tracePath = join(dir, 'audited.trace');
    const auditDir = join(dir, 'payloads');
    const shim = new CaptureShim(HOST, { outPath: tracePath, auditDir });
    runTwoKernelProgram(shim);
    shim.writeTrace();

    const stdout = execFileSync(
      'python3', ['-m', 'dmlens.cli', 'audit', tracePath, '--payload-dir', auditDir],
      { encoding: 'utf8' },
    );
    expect(stdout).toContain('collision_count: 0');
  });
});
